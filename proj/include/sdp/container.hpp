#pragma once

#include "sdp/common.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace sdp {

// On-disk container shared by datasets and checkpoints:
//   8-byte magic | u64 LE header length | JSON header | fp64 LE payload.
// Writes go through a temp file + rename so readers never observe a partial
// file. Only little-endian hosts are supported.

static_assert(std::endian::native == std::endian::little,
              "container payloads are little-endian; big-endian hosts are unsupported");

inline void write_container(const std::filesystem::path& path, const std::string& magic,
                            const nlohmann::json& header, const Vec& payload) {
    require(magic.size() == 8, "container magic must be exactly 8 bytes");
    const std::string head = header.dump();
    const std::uint64_t head_len = head.size();

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out.write(magic.data(), 8);
        out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
        out.write(head.data(), static_cast<std::streamsize>(head.size()));
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(double)));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

struct Container {
    nlohmann::json header;
    Vec payload;
};

inline Container read_container(const std::filesystem::path& path, const std::string& magic) {
    require(magic.size() == 8, "container magic must be exactly 8 bytes");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());

    char got[8];
    in.read(got, 8);
    if (!in || std::memcmp(got, magic.data(), 8) != 0)
        throw std::runtime_error("bad magic in " + path.string() + " (expected " + magic + ")");

    std::uint64_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in) throw std::runtime_error("truncated header length in " + path.string());

    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    if (!in) throw std::runtime_error("truncated header in " + path.string());

    Container c;
    c.header = nlohmann::json::parse(head);

    const auto data_start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto data_bytes = in.tellg() - data_start;
    if (data_bytes % static_cast<std::streamoff>(sizeof(double)) != 0)
        throw std::runtime_error("payload not a whole number of doubles in " + path.string());
    in.seekg(data_start);
    c.payload.resize(data_bytes / static_cast<std::streamoff>(sizeof(double)));
    in.read(reinterpret_cast<char*>(c.payload.data()), data_bytes);
    if (!in) throw std::runtime_error("truncated payload in " + path.string());
    return c;
}

}  // namespace sdp
