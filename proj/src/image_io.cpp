#include "progstain/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace progstain {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Image read_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    std::string error;
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
    if (!png) throw IoError("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng initialization failed");
    }

    // Everything touched after setjmp must outlive the longjmp target.
    std::vector<unsigned char> raw;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int channels = 0, bit_depth = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path.string() + "': " + (error.empty() ? "invalid PNG" : error));
    }

    png_init_io(png, file.get());
    png_read_info(png, info);
    int color_type = png_get_color_type(png, info);
    bit_depth = png_get_bit_depth(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // host little-endian for uint16 reads
    png_read_update_info(png, info);

    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    bit_depth = png_get_bit_depth(png, info);

    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw InvalidArgument("'" + path.string() + "': unsupported channel count " +
                              std::to_string(channels));
    }

    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    std::vector<double> data(n);
    if (bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint16_t v;
            std::memcpy(&v, raw.data() + 2 * i, 2);
            data[i] = v / 65535.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) data[i] = raw[i] / 255.0;
    }
    return Image(static_cast<int>(height), static_cast<int>(width), channels, std::move(data));
}

void write_png(const Image& img, const std::filesystem::path& path, int bit_depth) {
    FilePtr file = open_file(path, "wb");
    std::string error;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
    if (!png) throw IoError("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }

    // 16-bit samples are stored big-endian as PNG requires.
    const int bytes = bit_depth / 8;
    std::vector<unsigned char> raw(img.data().size() * bytes);
    for (std::size_t i = 0; i < img.data().size(); ++i) {
        if (bytes == 1) {
            raw[i] = quantize_8bit(img.data()[i]);
        } else {
            const std::uint16_t q = quantize_16bit(img.data()[i]);
            raw[2 * i] = static_cast<unsigned char>(q >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        }
    }
    const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * img.channels() * bytes;
    std::vector<png_bytep> rows(img.height());
    for (int r = 0; r < img.height(); ++r) rows[r] = raw.data() + r * row_bytes;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("'" + path.string() + "': " + (error.empty() ? "PNG write failed" : error));
    }

    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width(), img.height(), bit_depth,
                 img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    if (std::fflush(file.get()) != 0) throw IoError("'" + path.string() + "': write failed");
}

// Netpbm tokens may be interleaved with '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

int parse_int(const std::string& tok, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
    throw IoError("'" + path.string() + "': malformed netpbm header");
}

Image read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    const std::string magic = next_token(in);
    int channels = 0;
    bool ascii = false;
    if (magic == "P2") channels = 1, ascii = true;
    else if (magic == "P3") channels = 3, ascii = true;
    else if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw IoError("'" + path.string() + "': unsupported netpbm variant '" + magic + "'");

    const int width = parse_int(next_token(in), path);
    const int height = parse_int(next_token(in), path);
    const int maxval = parse_int(next_token(in), path);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("'" + path.string() + "': invalid netpbm header values");

    const std::size_t n = static_cast<std::size_t>(width) * height * channels;
    std::vector<double> data(n);
    if (ascii) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::string tok = next_token(in);
            if (tok.empty()) throw IoError("'" + path.string() + "': truncated pixel data");
            const int v = parse_int(tok, path);
            if (v < 0 || v > maxval) throw IoError("'" + path.string() + "': sample exceeds maxval");
            data[i] = static_cast<double>(v) / maxval;
        }
    } else {
        // next_token consumed exactly one whitespace byte after maxval.
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(n * bytes);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
            throw IoError("'" + path.string() + "': truncated pixel data");
        for (std::size_t i = 0; i < n; ++i) {
            const int v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
            if (v > maxval) throw IoError("'" + path.string() + "': sample exceeds maxval");
            data[i] = static_cast<double>(v) / maxval;
        }
    }
    return Image(height, width, channels, std::move(data));
}

void write_netpbm(const Image& img, const std::filesystem::path& path, bool want_color, int bit_depth) {
    if (want_color != (img.channels() == 3)) {
        throw InvalidArgument("'" + path.string() + "': " + std::to_string(img.channels()) +
                              "-channel image does not fit this netpbm variant");
    }
    std::ostringstream out;
    out << (want_color ? "P3" : "P2") << '\n'
        << img.width() << ' ' << img.height() << '\n' << (bit_depth == 16 ? 65535 : 255) << '\n';
    const int per_row = img.width() * img.channels();
    const auto data = img.data();
    for (int r = 0; r < img.height(); ++r) {
        for (int i = 0; i < per_row; ++i) {
            if (i) out << ' ';
            const double v = data[static_cast<std::size_t>(r) * per_row + i];
            out << (bit_depth == 16 ? static_cast<int>(quantize_16bit(v)) : static_cast<int>(quantize_8bit(v)));
        }
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + path.string() + "' for writing");
    file << out.str();
    file.flush();
    if (!file) throw IoError("'" + path.string() + "': write failed");
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

} // namespace

unsigned char quantize_8bit(double v) noexcept {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image load_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open '" + path.string() + "'");
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), sizeof sig);
    const auto got = probe.gcount();
    probe.close();

    if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (got >= 2 && sig[0] == 'P' && sig[1] >= '1' && sig[1] <= '7') return read_netpbm(path);
    throw IoError("'" + path.string() + "': unrecognized image format");
}

std::uint16_t quantize_16bit(double v) noexcept {
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

void save_image(const Image& img, const std::filesystem::path& path, int bit_depth) {
    if (img.empty()) throw InvalidArgument("cannot save an empty image");
    if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("bit depth must be 8 or 16");
    const std::string ext = lower_extension(path);
    if (ext == ".png") return write_png(img, path, bit_depth);
    if (ext == ".ppm") return write_netpbm(img, path, true, bit_depth);
    if (ext == ".pgm") return write_netpbm(img, path, false, bit_depth);
    if (ext == ".pnm") return write_netpbm(img, path, img.channels() == 3, bit_depth);
    throw InvalidArgument("'" + path.string() + "': unsupported output extension");
}

} // namespace progstain
