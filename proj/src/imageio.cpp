#include "gr/imageio.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gr::io {
namespace {

std::string lower_ext(const std::filesystem::path& file) {
    std::string ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_all(const std::filesystem::path& file, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + file.string());
}

// ---- PGM (binary P5) ----

int parse_pnm_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
    // skip whitespace and '#' comments
    for (;;) {
        while (pos < b.size() && std::isspace(b[pos])) ++pos;
        if (pos < b.size() && b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    if (pos >= b.size() || !std::isdigit(b[pos])) throw InputError("malformed PGM header");
    int v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) v = v * 10 + (b[pos++] - '0');
    return v;
}

GrayImage read_pgm(const std::filesystem::path& file) {
    auto bytes = read_all(file);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw InputError(file.string() + ": not a binary PGM");
    std::size_t pos = 2;
    int w = parse_pnm_int(bytes, pos);
    int h = parse_pnm_int(bytes, pos);
    int maxval = parse_pnm_int(bytes, pos);
    if (maxval != 255) throw InputError(file.string() + ": only 8-bit PGM supported");
    ++pos;  // single whitespace after maxval
    std::size_t need = static_cast<std::size_t>(w) * h;
    if (bytes.size() < pos + need) throw InputError(file.string() + ": truncated PGM");
    GrayImage img(w, h);
    std::memcpy(img.data.data(), bytes.data() + pos, need);
    return img;
}

void write_pgm(const std::filesystem::path& file, const GrayImage& img) {
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                         "\n255\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.data.begin(), img.data.end());
    write_all(file, bytes);
}

// ---- PNG ----
// Chunk layout and filtering are handled here; DEFLATE is delegated to zlib.

constexpr std::array<std::uint8_t, 8> kPngSig = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    push_be32(out, crc);
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
    uLongf cap = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(cap);
    if (::compress2(out.data(), &cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw InputError("deflate failed");
    out.resize(cap);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& comp,
                                       std::size_t expect) {
    std::vector<std::uint8_t> out(expect);
    uLongf got = static_cast<uLongf>(expect);
    int rc = ::uncompress(out.data(), &got, comp.data(), static_cast<uLong>(comp.size()));
    if (rc != Z_OK || got != expect) throw InputError("inflate failed or size mismatch");
    return out;
}

void encode_png(const std::filesystem::path& file, const std::uint8_t* pixels, int w, int h,
                int channels) {
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(h) * (1 + static_cast<std::size_t>(w) * channels));
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);  // filter: None
        raw.insert(raw.end(), pixels + y * stride, pixels + (y + 1) * stride);
    }

    std::vector<std::uint8_t> png(kPngSig.begin(), kPngSig.end());
    std::vector<std::uint8_t> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(w));
    push_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                                   // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);               // gray / truecolor
    ihdr.push_back(0);                                   // compression
    ihdr.push_back(0);                                   // filter method
    ihdr.push_back(0);                                   // no interlace
    push_chunk(png, "IHDR", ihdr);
    push_chunk(png, "IDAT", zlib_deflate(raw));
    push_chunk(png, "IEND", {});
    write_all(file, png);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 = gray, 3 = rgb (after palette/alpha resolution)
    std::vector<std::uint8_t> pixels;
};

DecodedPng decode_png(const std::filesystem::path& file) {
    auto bytes = read_all(file);
    if (bytes.size() < 8 || !std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin()))
        throw InputError(file.string() + ": not a PNG");

    int w = 0, h = 0, depth = 0, color = 0, interlace = 0;
    std::vector<std::uint8_t> idat;
    std::vector<std::uint8_t> palette;

    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = be32(&bytes[pos]);
        std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        if (pos + 12 + len > bytes.size()) throw InputError(file.string() + ": truncated chunk");
        const std::uint8_t* payload = &bytes[pos + 8];
        if (type == "IHDR") {
            w = static_cast<int>(be32(payload));
            h = static_cast<int>(be32(payload + 4));
            depth = payload[8];
            color = payload[9];
            interlace = payload[12];
        } else if (type == "PLTE") {
            palette.assign(payload, payload + len);
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0) throw InputError(file.string() + ": bad PNG dimensions");
    if (depth != 8) throw InputError(file.string() + ": only 8-bit PNG supported");
    if (interlace != 0) throw InputError(file.string() + ": interlaced PNG not supported");

    int src_ch;
    switch (color) {
        case 0: src_ch = 1; break;  // gray
        case 2: src_ch = 3; break;  // rgb
        case 3: src_ch = 1; break;  // palette index
        case 4: src_ch = 2; break;  // gray + alpha
        case 6: src_ch = 4; break;  // rgba
        default: throw InputError(file.string() + ": unsupported PNG color type");
    }

    const std::size_t stride = static_cast<std::size_t>(w) * src_ch;
    auto raw = zlib_inflate(idat, (stride + 1) * h);

    // undo per-row filters in place
    std::vector<std::uint8_t> img(stride * h);
    for (int y = 0; y < h; ++y) {
        std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &img[y * stride];
        const std::uint8_t* up = y > 0 ? &img[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<std::size_t>(src_ch) ? dst[i - src_ch] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= static_cast<std::size_t>(src_ch)) ? up[i - src_ch] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw InputError(file.string() + ": bad PNG filter type");
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }

    DecodedPng out;
    out.width = w;
    out.height = h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (color == 0) {
        out.channels = 1;
        out.pixels = std::move(img);
    } else if (color == 4) {
        out.channels = 1;
        out.pixels.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.pixels[i] = img[i * 2];
    } else if (color == 2) {
        out.channels = 3;
        out.pixels = std::move(img);
    } else if (color == 6) {
        out.channels = 3;
        out.pixels.resize(n * 3);
        for (std::size_t i = 0; i < n; ++i) {
            out.pixels[i * 3 + 0] = img[i * 4 + 0];
            out.pixels[i * 3 + 1] = img[i * 4 + 1];
            out.pixels[i * 3 + 2] = img[i * 4 + 2];
        }
    } else {  // palette
        if (palette.empty()) throw InputError(file.string() + ": palette PNG without PLTE");
        out.channels = 3;
        out.pixels.resize(n * 3);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t idx = static_cast<std::size_t>(img[i]) * 3;
            if (idx + 2 >= palette.size()) throw InputError(file.string() + ": palette overflow");
            out.pixels[i * 3 + 0] = palette[idx + 0];
            out.pixels[i * 3 + 1] = palette[idx + 1];
            out.pixels[i * 3 + 2] = palette[idx + 2];
        }
    }
    return out;
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    double v = 0.299 * r + 0.587 * g + 0.114 * b;
    long rounded = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(rounded, 0L, 255L));
}

}  // namespace

GrayImage read_gray(const std::filesystem::path& file) {
    std::string ext = lower_ext(file);
    if (ext == ".pgm") return read_pgm(file);
    if (ext == ".png") {
        DecodedPng png = decode_png(file);
        GrayImage img(png.width, png.height);
        if (png.channels == 1) {
            img.data = std::move(png.pixels);
        } else {
            for (std::size_t i = 0; i < img.size(); ++i)
                img.data[i] =
                    luma(png.pixels[i * 3], png.pixels[i * 3 + 1], png.pixels[i * 3 + 2]);
        }
        return img;
    }
    throw InputError(file.string() + ": unsupported image extension");
}

RgbImage read_rgb(const std::filesystem::path& file) {
    std::string ext = lower_ext(file);
    if (ext == ".pgm") {
        GrayImage g = read_pgm(file);
        RgbImage img(g.width, g.height);
        for (std::size_t i = 0; i < g.size(); ++i) {
            img.data[i * 3] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = g.data[i];
        }
        return img;
    }
    if (ext == ".png") {
        DecodedPng png = decode_png(file);
        RgbImage img(png.width, png.height);
        if (png.channels == 3) {
            img.data = std::move(png.pixels);
        } else {
            for (std::size_t i = 0; i < png.pixels.size(); ++i) {
                img.data[i * 3] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = png.pixels[i];
            }
        }
        return img;
    }
    throw InputError(file.string() + ": unsupported image extension");
}

void write_gray(const std::filesystem::path& file, const GrayImage& img) {
    std::string ext = lower_ext(file);
    if (ext == ".pgm") return write_pgm(file, img);
    if (ext == ".png") return encode_png(file, img.data.data(), img.width, img.height, 1);
    throw InputError(file.string() + ": unsupported image extension");
}

void write_rgb(const std::filesystem::path& file, const RgbImage& img) {
    if (lower_ext(file) != ".png") throw InputError(file.string() + ": RGB output must be PNG");
    encode_png(file, img.data.data(), img.width, img.height, 3);
}

void write_mask(const std::filesystem::path& file, const BinaryMask& mask) {
    GrayImage img(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 255 : 0;
    write_gray(file, img);
}

BinaryMask read_mask(const std::filesystem::path& file) {
    GrayImage img = read_gray(file);
    BinaryMask mask(img.width, img.height);
    for (std::size_t i = 0; i < img.size(); ++i) mask.data[i] = img.data[i] > 127 ? 1 : 0;
    return mask;
}

bool is_image_file(const std::filesystem::path& file) {
    std::string ext = lower_ext(file);
    return ext == ".png" || ext == ".pgm";
}

}  // namespace gr::io
