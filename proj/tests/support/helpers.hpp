#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ttrk/ttrk.hpp"

namespace testsup {

// splitmix64: small deterministic generator for fixture data.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
    }
    std::int8_t code() { return static_cast<std::int8_t>(static_cast<std::uint8_t>(next() & 0xff)); }
};

inline ttrk::Tensor random_f32(Rng& rng, const ttrk::Shape& shape, double lo, double hi) {
    std::vector<float> v(static_cast<std::size_t>(shape.elements()));
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return ttrk::Tensor::f32(shape, v);
}

inline ttrk::Tensor random_i8(Rng& rng, const ttrk::Shape& shape, const ttrk::QuantParams& qp) {
    std::vector<std::int8_t> v(static_cast<std::size_t>(shape.elements()));
    for (auto& x : v) x = rng.code();
    return ttrk::Tensor::i8(shape, qp, v);
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "ttrk_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("read failed: " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Binary PNM built by hand, independent of the library writer.
inline std::string pgm_bytes(int w, int h, const std::vector<std::uint8_t>& pixels) {
    std::string s = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    s.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    return s;
}

inline std::string ppm_bytes(int w, int h, const std::vector<std::uint8_t>& pixels) {
    std::string s = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    s.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    return s;
}

inline std::string env_or_throw(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) throw std::runtime_error(std::string("environment variable not set: ") + name);
    return v;
}

inline std::string cli_path() { return env_or_throw("TTRK_CLI_PATH"); }
inline std::string data_dir() { return env_or_throw("TTRK_DATA_DIR"); }

struct CliResult {
    int exit_code = -1;
    bool crashed = false;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'')
            q += "'\\''";
        else
            q += c;
    }
    return q + "'";
}

// Run the CLI as a subprocess with stdout/stderr captured to files in dir.
inline CliResult run_cli(const std::vector<std::string>& args, const std::filesystem::path& dir) {
    const std::filesystem::path out_p = dir / ".cli_stdout";
    const std::filesystem::path err_p = dir / ".cli_stderr";
    std::string cmd = shell_quote(cli_path());
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " > " + shell_quote(out_p.string()) + " 2> " + shell_quote(err_p.string());
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (status == -1) throw std::runtime_error("system() failed");
    if (WIFEXITED(status)) {
        r.exit_code = WEXITSTATUS(status);
    } else {
        r.crashed = true;
    }
    r.out = read_file(out_p);
    r.err = read_file(err_p);
    return r;
}

// A much smaller network with the same ingredient list (expand-less stage,
// squeeze-excite, hard swish, residual add) for fast end-to-end tests.
inline ttrk::TinyTrackerConfig tiny_config(std::int64_t input_size = 24) {
    ttrk::TinyTrackerConfig cfg;
    cfg.input_size = input_size;
    cfg.input_channels = 3;
    cfg.stem_channels = 16;
    cfg.stages = {
        {3, 16, 16, true, false, 2},
        {3, 24, 24, false, true, 1},
        {5, 48, 24, true, true, 1},
    };
    cfg.head_channels = 32;
    cfg.fc_hidden = 16;
    cfg.output_dim = 2;
    return cfg;
}

// Deterministic synthetic calibration frames covering a spread of intensities.
inline ttrk::Tensor synthetic_frame(Rng& rng, std::int64_t size) {
    ttrk::Tensor t = ttrk::Tensor::f32(ttrk::Shape{1, size, size, 3});
    auto v = t.f();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.real());
    return t;
}

} // namespace testsup
