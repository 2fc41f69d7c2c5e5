#ifndef RAS_WEIGHTS_HPP
#define RAS_WEIGHTS_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ras/network.hpp"
#include "ras/tensor.hpp"

namespace ras {

// RASW weight file, little-endian:
//   magic "RASW", version u32 = 1,
//   spec-blob length u32 + UTF-8 JSON NetworkSpec,
//   tensor count u32,
//   per tensor: name length u16 + name, rank u8, dims u32 each,
//               dtype u8 (0 = f32, 1 = f64), raw data.
// No padding between records.

struct WeightsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "RASW serialization assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

    template <typename T>
    T get() {
        T v{};
        read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }

    void read(char* dst, std::size_t len) {
        is_.read(dst, std::streamsize(len));
        if (std::size_t(is_.gcount()) != len)
            throw WeightsError(path_ + ": truncated at offset " + std::to_string(offset_) +
                               " (wanted " + std::to_string(len) + " bytes)");
        offset_ += len;
    }

    std::size_t offset() const { return offset_; }

private:
    std::istream& is_;
    std::string path_;
    std::size_t offset_ = 0;
};

} // namespace detail

template <typename Scalar>
void save_weights(const Model<Scalar>& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw WeightsError("cannot open " + path + " for writing");
    os.write("RASW", 4);
    detail::put<std::uint32_t>(os, 1);
    const std::string spec = m.spec().to_json().dump();
    detail::put<std::uint32_t>(os, std::uint32_t(spec.size()));
    os.write(spec.data(), std::streamsize(spec.size()));
    detail::put<std::uint32_t>(os, std::uint32_t(m.num_params()));
    for (const auto& p : m.params()) {
        detail::put<std::uint16_t>(os, std::uint16_t(p.name.size()));
        os.write(p.name.data(), std::streamsize(p.name.size()));
        detail::put<std::uint8_t>(os, 4); // rank: always 4-D here
        const Shape4& s = p.value.shape();
        detail::put<std::uint32_t>(os, std::uint32_t(s.n));
        detail::put<std::uint32_t>(os, std::uint32_t(s.c));
        detail::put<std::uint32_t>(os, std::uint32_t(s.h));
        detail::put<std::uint32_t>(os, std::uint32_t(s.w));
        detail::put<std::uint8_t>(os, std::is_same_v<Scalar, float> ? 0 : 1);
        os.write(reinterpret_cast<const char*>(p.value.data()),
                 std::streamsize(std::size_t(p.value.numel()) * sizeof(Scalar)));
    }
    if (!os) throw WeightsError("write failed for " + path);
}

template <typename Scalar>
Model<Scalar> load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw WeightsError("cannot open " + path);
    detail::Reader r(is, path);

    char magic[4];
    r.read(magic, 4);
    if (std::memcmp(magic, "RASW", 4) != 0)
        throw WeightsError(path + ": bad magic at offset 0");
    const auto version = r.get<std::uint32_t>();
    if (version != 1)
        throw WeightsError(path + ": unsupported version " + std::to_string(version) +
                           " at offset 4");

    const auto spec_len = r.get<std::uint32_t>();
    std::string spec_json(spec_len, '\0');
    r.read(spec_json.data(), spec_len);
    NetworkSpec spec;
    try {
        spec = NetworkSpec::from_json(nlohmann::json::parse(spec_json));
    } catch (const nlohmann::json::exception& e) {
        throw WeightsError(path + ": bad spec blob: " + e.what());
    }

    Model<Scalar> m(spec);
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = r.get<std::uint16_t>();
        std::string name(name_len, '\0');
        r.read(name.data(), name_len);
        const auto rank = r.get<std::uint8_t>();
        if (rank != 4)
            throw WeightsError(path + ": tensor '" + name + "' has unsupported rank " +
                               std::to_string(rank) + " at offset " + std::to_string(r.offset()));
        Shape4 s;
        s.n = int(r.get<std::uint32_t>());
        s.c = int(r.get<std::uint32_t>());
        s.h = int(r.get<std::uint32_t>());
        s.w = int(r.get<std::uint32_t>());
        const auto dtype = r.get<std::uint8_t>();
        const std::uint8_t want = std::is_same_v<Scalar, float> ? 0 : 1;
        if (dtype != want)
            throw WeightsError(path + ": tensor '" + name + "' has dtype " +
                               std::to_string(dtype) + ", expected " + std::to_string(want) +
                               " at offset " + std::to_string(r.offset()));
        Tensor<Scalar> v(s);
        r.read(reinterpret_cast<char*>(v.data()), std::size_t(v.numel()) * sizeof(Scalar));
        m.add(std::move(name), std::move(v));
    }
    return m;
}

} // namespace ras

#endif
