#ifndef RAS_PNM_HPP
#define RAS_PNM_HPP

#include <cctype>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ras {

struct PnmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Binary PGM (P5) or PPM (P6), maxval 255, interleaved pixels.
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 or 3
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c = 0) {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return pixels[(std::size_t(y) * width + x) * channels + c];
    }
};

namespace detail {

inline int pnm_int(std::istream& is, const std::string& path) {
    // skip whitespace and '#' comments
    int ch = is.get();
    while (ch != EOF && (std::isspace(ch) || ch == '#')) {
        if (ch == '#')
            while (ch != EOF && ch != '\n') ch = is.get();
        ch = is.get();
    }
    if (ch == EOF || !std::isdigit(ch)) throw PnmError(path + ": malformed PNM header");
    int v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        ch = is.get();
    }
    if (ch != EOF && !std::isspace(ch)) throw PnmError(path + ": malformed PNM header");
    return v;
}

} // namespace detail

inline ImageU8 read_pnm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw PnmError("cannot open " + path);
    char m0 = char(is.get()), m1 = char(is.get());
    ImageU8 img;
    if (m0 == 'P' && m1 == '5')
        img.channels = 1;
    else if (m0 == 'P' && m1 == '6')
        img.channels = 3;
    else
        throw PnmError(path + ": expected P5/P6 magic");
    img.width = detail::pnm_int(is, path);
    img.height = detail::pnm_int(is, path);
    const int maxval = detail::pnm_int(is, path);
    if (maxval != 255) throw PnmError(path + ": maxval must be 255, got " + std::to_string(maxval));
    if (img.width <= 0 || img.height <= 0) throw PnmError(path + ": bad dimensions");
    img.pixels.resize(std::size_t(img.width) * img.height * img.channels);
    is.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (std::size_t(is.gcount()) != img.pixels.size())
        throw PnmError(path + ": truncated pixel data");
    return img;
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw PnmError(path + ": only 1- or 3-channel images are supported");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw PnmError("cannot open " + path + " for writing");
    os << (img.channels == 1 ? "P5" : "P6") << "\n"
       << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (!os) throw PnmError("write failed for " + path);
}

} // namespace ras

#endif
