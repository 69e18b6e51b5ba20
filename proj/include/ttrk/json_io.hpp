#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "ttrk/common.hpp"

#include <json.hpp>

namespace ttrk {

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f.good()) throw invalid_input("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw format_error("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

/// Write via a temp file and rename, so readers never see a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "cannot open '" + tmp.string() + "' for writing");
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        require(f.good(), "write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ttrk
