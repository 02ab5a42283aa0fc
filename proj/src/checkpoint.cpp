// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

const NamedTensor& CheckpointData::at(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::out_of_range("checkpoint has no tensor '" + name + "'");
}

bool CheckpointData::has_section(const std::string& section) const {
    for (const NamedTensor& t : tensors) {
        if (t.section == section) return true;
    }
    return false;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    json index = json::array();
    std::string blob;
    for (const NamedTensor& t : data.tensors) {
        index.push_back({{"name", t.name},
                         {"section", t.section},
                         {"rows", t.value.rows()},
                         {"cols", t.value.cols()},
                         {"offset", blob.size()}});
        for (Index i = 0; i < t.value.size(); ++i) {
            const float f = static_cast<float>(t.value.data()[i]);
            char bytes[4];
            std::memcpy(bytes, &f, 4);
            blob.append(bytes, 4);
        }
    }
    const json header = {{"magic", kCheckpointMagic},
                         {"version", kCheckpointVersion},
                         {"meta", data.meta},
                         {"tensors", std::move(index)}};
    const std::string h = header.dump();
    std::string out;
    std::uint64_t len = h.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
    out += h;
    out += blob;
    write_file_atomic(path, out);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    const std::string where = "checkpoint " + path.string() + ": ";
    if (raw.size() < 8) throw std::runtime_error(where + "truncated");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    if (len > raw.size() - 8) throw std::runtime_error(where + "truncated header");
    json header;
    try {
        header = json::parse(raw.substr(8, len));
    } catch (const json::exception& e) {
        throw std::runtime_error(where + "bad header: " + e.what());
    }
    if (header.value("magic", "") != kCheckpointMagic) throw std::runtime_error(where + "bad magic");
    if (header.value("version", 0) != kCheckpointVersion) {
        throw std::runtime_error(where + "unsupported version " + header.value("version", json(0)).dump());
    }
    const std::size_t base = 8 + len;
    CheckpointData out;
    out.meta = header.at("meta");
    for (const json& e : header.at("tensors")) {
        NamedTensor t;
        t.name = e.at("name").get<std::string>();
        t.section = e.at("section").get<std::string>();
        const auto rows = e.at("rows").get<Index>();
        const auto cols = e.at("cols").get<Index>();
        const auto offset = e.at("offset").get<std::size_t>();
        const std::size_t bytes = static_cast<std::size_t>(rows * cols) * 4;
        if (base + offset + bytes > raw.size()) throw std::runtime_error(where + "truncated tensor '" + t.name + "'");
        t.value.resize(rows, cols);
        for (Index i = 0; i < rows * cols; ++i) {
            float f;
            std::memcpy(&f, raw.data() + base + offset + static_cast<std::size_t>(i) * 4, 4);
            t.value.data()[i] = static_cast<Scalar>(f);
        }
        out.tensors.push_back(std::move(t));
    }
    return out;
}

}  // namespace slotllm
