#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinkgrid/numerics/tensor.hpp"

namespace thinkgrid {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Versioned binary container: named tensors (shape + raw little-endian float
// payload) plus named u64 metadata (optimizer step, RNG seed, counters).
class Checkpoint {
public:
    static constexpr const char* kMagic = "THINKGRID-CKPT-v1\n";

    template <typename T>
    void add(const std::string& name, const Tensor<T>& t) {
        Entry e;
        e.dtype = sizeof(T);
        for (auto d : t.shape()) e.dims.push_back(d);
        e.bytes.resize(static_cast<std::size_t>(t.numel()) * sizeof(T));
        std::memcpy(e.bytes.data(), t.data(), e.bytes.size());
        tensors_[name] = std::move(e);
    }

    template <typename T>
    Tensor<T> tensor(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw CheckpointError("checkpoint: no tensor named " + name);
        const Entry& e = it->second;
        Shape shape(e.dims.begin(), e.dims.end());
        Tensor<T> out(shape);
        if (e.dtype == sizeof(T)) {
            std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
        } else if (e.dtype == 4) {
            const float* src = reinterpret_cast<const float*>(e.bytes.data());
            for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(src[i]);
        } else if (e.dtype == 8) {
            const double* src = reinterpret_cast<const double*>(e.bytes.data());
            for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(src[i]);
        } else {
            throw CheckpointError("checkpoint: unsupported dtype width " +
                                  std::to_string(e.dtype));
        }
        return out;
    }

    bool has_tensor(const std::string& name) const { return tensors_.count(name) != 0; }

    void set_meta(const std::string& name, std::uint64_t v) { meta_[name] = v; }

    std::uint64_t meta(const std::string& name) const {
        auto it = meta_.find(name);
        if (it == meta_.end()) throw CheckpointError("checkpoint: no metadata named " + name);
        return it->second;
    }

    bool has_meta(const std::string& name) const { return meta_.count(name) != 0; }

    std::vector<std::string> tensor_names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : tensors_) out.push_back(k);
        return out;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw CheckpointError("checkpoint: cannot open " + path + " for writing");
        f.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
        write_u32(f, static_cast<std::uint32_t>(tensors_.size()));
        for (const auto& [name, e] : tensors_) {
            write_str(f, name);
            const std::uint8_t dtype = static_cast<std::uint8_t>(e.dtype);
            const std::uint8_t rank = static_cast<std::uint8_t>(e.dims.size());
            f.put(static_cast<char>(dtype));
            f.put(static_cast<char>(rank));
            for (auto d : e.dims) write_u64(f, static_cast<std::uint64_t>(d));
            f.write(reinterpret_cast<const char*>(e.bytes.data()),
                    static_cast<std::streamsize>(e.bytes.size()));
        }
        write_u32(f, static_cast<std::uint32_t>(meta_.size()));
        for (const auto& [name, v] : meta_) {
            write_str(f, name);
            write_u64(f, v);
        }
        if (!f) throw CheckpointError("checkpoint: write failed for " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw CheckpointError("checkpoint: cannot open " + path);
        std::string magic(std::strlen(kMagic), '\0');
        f.read(magic.data(), static_cast<std::streamsize>(magic.size()));
        if (!f || magic != kMagic)
            throw CheckpointError("checkpoint: bad magic header in " + path);
        Checkpoint ck;
        const std::uint32_t n = read_u32(f, path);
        for (std::uint32_t i = 0; i < n; ++i) {
            std::string name = read_str(f, path);
            Entry e;
            e.dtype = static_cast<int>(read_u8(f, path));
            const int rank = static_cast<int>(read_u8(f, path));
            std::int64_t numel = 1;
            for (int r = 0; r < rank; ++r) {
                e.dims.push_back(static_cast<std::int64_t>(read_u64(f, path)));
                numel *= e.dims.back();
            }
            if (e.dtype != 4 && e.dtype != 8)
                throw CheckpointError("checkpoint: unsupported dtype in " + path);
            e.bytes.resize(static_cast<std::size_t>(numel) * static_cast<std::size_t>(e.dtype));
            f.read(reinterpret_cast<char*>(e.bytes.data()),
                   static_cast<std::streamsize>(e.bytes.size()));
            if (!f) throw CheckpointError("checkpoint: truncated tensor payload in " + path);
            ck.tensors_[name] = std::move(e);
        }
        const std::uint32_t m = read_u32(f, path);
        for (std::uint32_t i = 0; i < m; ++i) {
            std::string name = read_str(f, path);
            ck.meta_[name] = read_u64(f, path);
        }
        if (!f) throw CheckpointError("checkpoint: truncated metadata in " + path);
        return ck;
    }

private:
    struct Entry {
        int dtype = 4;
        std::vector<std::int64_t> dims;
        std::vector<std::uint8_t> bytes;
    };

    static void write_u32(std::ofstream& f, std::uint32_t v) {
        f.write(reinterpret_cast<const char*>(&v), 4);
    }
    static void write_u64(std::ofstream& f, std::uint64_t v) {
        f.write(reinterpret_cast<const char*>(&v), 8);
    }
    static void write_str(std::ofstream& f, const std::string& s) {
        const std::uint16_t len = static_cast<std::uint16_t>(s.size());
        f.write(reinterpret_cast<const char*>(&len), 2);
        f.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    static std::uint8_t read_u8(std::ifstream& f, const std::string& path) {
        char c;
        if (!f.get(c)) throw CheckpointError("checkpoint: truncated file " + path);
        return static_cast<std::uint8_t>(c);
    }
    static std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
        std::uint32_t v;
        if (!f.read(reinterpret_cast<char*>(&v), 4))
            throw CheckpointError("checkpoint: truncated file " + path);
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& f, const std::string& path) {
        std::uint64_t v;
        if (!f.read(reinterpret_cast<char*>(&v), 8))
            throw CheckpointError("checkpoint: truncated file " + path);
        return v;
    }
    static std::string read_str(std::ifstream& f, const std::string& path) {
        std::uint16_t len;
        if (!f.read(reinterpret_cast<char*>(&len), 2))
            throw CheckpointError("checkpoint: truncated file " + path);
        std::string s(len, '\0');
        if (!f.read(s.data(), len)) throw CheckpointError("checkpoint: truncated file " + path);
        return s;
    }

    std::map<std::string, Entry> tensors_;
    std::map<std::string, std::uint64_t> meta_;
};

} // namespace thinkgrid
