#include "cpalign/image.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "cpalign/error.hpp"

namespace cpalign {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PPM (binary P6, maxval 255)
// ---------------------------------------------------------------------------

Image decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {  // comment to end of line
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_ws();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw ParseError("ppm header: expected integer in " + origin);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
        }
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw ParseError("not a P6 ppm: " + origin);
    pos = 2;
    const long w = read_int();
    const long h = read_int();
    const long maxval = read_int();
    if (w <= 0 || h <= 0) throw ParseError("ppm: bad dimensions in " + origin);
    if (maxval != 255) throw ParseError("ppm: only maxval 255 supported: " + origin);
    ++pos;  // single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - pos < need) throw ParseError("ppm: truncated pixel data in " + origin);

    Image img(static_cast<int>(w), static_cast<int>(h));
    std::memcpy(img.pixels.data(), bytes.data() + pos, need);
    return img;
}

// ---------------------------------------------------------------------------
// PNG (subset: 8-bit RGB / RGBA, non-interlaced)
// ---------------------------------------------------------------------------

constexpr std::array<std::uint8_t, 8> kPngSig = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t be32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t size,
                                       std::size_t expected, const std::string& origin) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw Error("zlib inflateInit failed");
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected)
        throw ParseError("png: corrupt or truncated compressed data in " + origin);
    return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::uint8_t* data, std::size_t size) {
    uLongf bound = compressBound(static_cast<uLong>(size));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(size), 6) != Z_OK)
        throw Error("zlib compress failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig.data(), 8) != 0)
        throw ParseError("not a png: " + origin);

    std::size_t pos = 8;
    long w = -1, h = -1;
    int bit_depth = 0, color_type = 0;
    std::vector<std::uint8_t> idat;
    bool seen_iend = false;

    while (pos + 8 <= bytes.size() && !seen_iend) {
        const std::uint32_t len = be32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw ParseError("png: truncated chunk in " + origin);
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const std::uint8_t* payload = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ParseError("png: bad IHDR in " + origin);
            w = be32(payload);
            h = be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            const int interlace = payload[12];
            if (bit_depth != 8 || (color_type != 2 && color_type != 6))
                throw ParseError("png: only 8-bit RGB/RGBA supported: " + origin);
            if (interlace != 0) throw ParseError("png: interlacing not supported: " + origin);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;  // length + type + payload + crc
    }
    if (w <= 0 || h <= 0) throw ParseError("png: missing IHDR in " + origin);
    if (!seen_iend) throw ParseError("png: missing IEND (truncated file): " + origin);
    if (idat.empty()) throw ParseError("png: no IDAT data in " + origin);

    const int nch = color_type == 6 ? 4 : 3;
    const std::size_t stride = static_cast<std::size_t>(w) * nch;
    const std::size_t raw_size = (stride + 1) * static_cast<std::size_t>(h);
    const std::vector<std::uint8_t> raw = zlib_inflate(idat.data(), idat.size(), raw_size, origin);

    // Undo per-scanline filters.
    std::vector<std::uint8_t> flat(stride * h);
    for (long y = 0; y < h; ++y) {
        const std::uint8_t filter = raw[(stride + 1) * y];
        const std::uint8_t* src = raw.data() + (stride + 1) * y + 1;
        std::uint8_t* dst = flat.data() + stride * y;
        const std::uint8_t* prev = y > 0 ? flat.data() + stride * (y - 1) : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<std::size_t>(nch) ? dst[i - nch] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= static_cast<std::size_t>(nch)) ? prev[i - nch] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw ParseError("png: unknown filter type in " + origin);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
    }

    Image img(static_cast<int>(w), static_cast<int>(h));
    if (nch == 3) {
        img.pixels.assign(flat.begin(), flat.end());
    } else {
        for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i) {
            img.pixels[i * 3 + 0] = flat[i * 4 + 0];
            img.pixels[i * 3 + 1] = flat[i * 4 + 1];
            img.pixels[i * 3 + 2] = flat[i * 4 + 2];
        }
    }
    return img;
}

void append_chunk(std::vector<std::uint8_t>& out, const char* type,
                  const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc =
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw ValidationError("encode_png: empty image");
    std::vector<std::uint8_t> out(kPngSig.begin(), kPngSig.end());

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(img.width));
    put_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type RGB
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);

    // Filter type 0 on every scanline keeps the encoder deterministic and simple.
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[(stride + 1) * y] = 0;
        std::memcpy(raw.data() + (stride + 1) * y + 1, img.pixels.data() + stride * y, stride);
    }
    append_chunk(out, "IDAT", zlib_deflate(raw.data(), raw.size()));
    append_chunk(out, "IEND", {});
    return out;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
    if (img.width <= 0 || img.height <= 0) throw ValidationError("encode_ppm: empty image");
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

Image decode_image(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig.data(), 8) == 0)
        return decode_png(bytes, origin);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, origin);
    throw ParseError("unrecognized image format: " + origin);
}

Image read_image(const std::filesystem::path& path) {
    return decode_image(read_file(path), path.string());
}

void write_image(const Image& img, const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".png") {
        write_file(path, encode_png(img));
    } else if (ext == ".ppm") {
        write_file(path, encode_ppm(img));
    } else {
        throw ValidationError("unsupported image extension (use .png or .ppm): " + path.string());
    }
}

Image crop(const Image& src, const PixelRect& r) {
    if (r.empty() || r.x0 < 0 || r.y0 < 0 || r.x1 > src.width || r.y1 > src.height)
        throw ValidationError("crop: rectangle out of bounds");
    Image out(r.width(), r.height());
    for (int y = 0; y < out.height; ++y) {
        std::memcpy(out.at(0, y), src.at(r.x0, r.y0 + y),
                    static_cast<std::size_t>(out.width) * 3);
    }
    return out;
}

void blit(Image& host, const Image& patch, int x, int y) {
    if (x < 0 || y < 0 || x + patch.width > host.width || y + patch.height > host.height)
        throw ValidationError("blit: patch does not fit host");
    for (int row = 0; row < patch.height; ++row) {
        std::memcpy(host.at(x, y + row), patch.at(0, row),
                    static_cast<std::size_t>(patch.width) * 3);
    }
}

}  // namespace cpalign
