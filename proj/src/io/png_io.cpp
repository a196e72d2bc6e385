#include "oasis/io/png_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <set>

namespace oasis {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw InputError("cannot open file: " + path.string());
    return f;
}

// libpng error handling: record the message and longjmp back to the caller's
// setjmp point (exceptions must not unwind through libpng's C frames).
struct PngCtx {
    std::string errmsg;
};

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* ctx = (PngCtx*)png_get_error_ptr(png);
    if (ctx) ctx->errmsg = msg;
    png_longjmp(png, 1);
}
void png_warn_fn(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngCtx ctx;

    PngReader() {
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_fn,
                                     png_warn_fn);
        info = png_create_info_struct(png);
    }
    ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    PngCtx ctx;

    PngWriter() {
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_error_fn,
                                      png_warn_fn);
        info = png_create_info_struct(png);
    }
    ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

bool looks_like_png(FILE* f) {
    unsigned char sig[8];
    const size_t n = std::fread(sig, 1, 8, f);
    std::rewind(f);
    return n == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Tensor rows_to_tensor(const std::vector<std::vector<uint8_t>>& rows, int h, int w) {
    Tensor out = Tensor::zeros({3, h, w});
    float* p = out.data();
    const int hw = h * w;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                p[(size_t)c * hw + (size_t)y * w + x] =
                    (float)rows[(size_t)y][(size_t)x * 3 + (size_t)c] / 255.0f;
    return out;
}

Tensor read_png_rgb(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    PngReader r;
    std::vector<std::vector<uint8_t>> rows;
    std::vector<png_bytep> row_ptrs;
    int w = 0, h = 0;
    if (setjmp(png_jmpbuf(r.png)))
        throw InputError("corrupt PNG " + path.string() + ": " + r.ctx.errmsg);

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    w = (int)png_get_image_width(r.png, r.info);
    h = (int)png_get_image_height(r.png, r.info);
    const png_byte color = png_get_color_type(r.png, r.info);
    const png_byte depth = png_get_bit_depth(r.png, r.info);

    if (depth == 16) png_set_strip_16(r.png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if ((color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) && depth < 8)
        png_set_expand_gray_1_2_4_to_8(r.png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    rows.resize((size_t)h);
    row_ptrs.resize((size_t)h);
    const size_t rowbytes = png_get_rowbytes(r.png, r.info);
    for (int y = 0; y < h; ++y) {
        rows[(size_t)y].resize(rowbytes);
        row_ptrs[(size_t)y] = rows[(size_t)y].data();
    }
    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);
    return rows_to_tensor(rows, h, w);
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char msg[JMSG_LENGTH_MAX] = {0};
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = (JpegErrorMgr*)cinfo->err;
    (*cinfo->err->format_message)(cinfo, mgr->msg);
    std::longjmp(mgr->jump, 1);
}

Tensor read_jpeg_rgb(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    jpeg_decompress_struct cinfo{};
    JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::vector<uint8_t>> rows;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw InputError("corrupt JPEG " + path.string() + ": " + err.msg);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int w = (int)cinfo.output_width, h = (int)cinfo.output_height;
    rows.resize((size_t)h);
    for (int y = 0; y < h; ++y) {
        rows[(size_t)y].resize((size_t)w * 3);
        uint8_t* ptr = rows[(size_t)y].data();
        jpeg_read_scanlines(&cinfo, &ptr, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return rows_to_tensor(rows, h, w);
}

uint8_t to_byte(float v) {
    const float c = std::min(std::max(v, 0.0f), 1.0f);
    return (uint8_t)std::lround(c * 255.0f);
}

}  // namespace

const Palette& davis_palette() {
    static const Palette palette = [] {
        Palette p(256);
        for (int i = 0; i < 256; ++i) {
            int c = i;
            uint8_t r = 0, g = 0, b = 0;
            for (int j = 0; j < 8; ++j) {
                r = (uint8_t)(r | (((c >> 0) & 1) << (7 - j)));
                g = (uint8_t)(g | (((c >> 1) & 1) << (7 - j)));
                b = (uint8_t)(b | (((c >> 2) & 1) << (7 - j)));
                c >>= 3;
            }
            p[(size_t)i] = {r, g, b};
        }
        return p;
    }();
    return palette;
}

Tensor read_image_rgb(const std::filesystem::path& path) {
    bool is_png = false;
    {
        FilePtr probe = open_file(path, "rb");
        is_png = looks_like_png(probe.get());
    }
    return is_png ? read_png_rgb(path) : read_jpeg_rgb(path);
}

void write_image_rgb(const std::filesystem::path& path, const Tensor& image) {
    if (image.dim() != 3 || image.shape()[0] != 3)
        throw InputError("write_image_rgb: expects [3,H,W]");
    const int h = image.shape()[1], w = image.shape()[2];
    const int hw = h * w;
    FilePtr f = open_file(path, "wb");
    PngWriter wr;
    std::vector<uint8_t> row((size_t)w * 3);
    if (setjmp(png_jmpbuf(wr.png)))
        throw InputError("PNG write failed " + path.string() + ": " + wr.ctx.errmsg);
    png_init_io(wr.png, f.get());
    png_set_IHDR(wr.png, wr.info, (png_uint_32)w, (png_uint_32)h, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    const float* p = image.data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                row[(size_t)x * 3 + (size_t)c] = to_byte(p[(size_t)c * hw + (size_t)y * w + x]);
        png_write_row(wr.png, row.data());
    }
    png_write_end(wr.png, nullptr);
}

void write_gray_png(const std::filesystem::path& path, const Tensor& image) {
    if (image.dim() != 3 || image.shape()[0] != 1)
        throw InputError("write_gray_png: expects [1,H,W]");
    const int h = image.shape()[1], w = image.shape()[2];
    FilePtr f = open_file(path, "wb");
    PngWriter wr;
    std::vector<uint8_t> row((size_t)w);
    if (setjmp(png_jmpbuf(wr.png)))
        throw InputError("PNG write failed " + path.string() + ": " + wr.ctx.errmsg);
    png_init_io(wr.png, f.get());
    png_set_IHDR(wr.png, wr.info, (png_uint_32)w, (png_uint_32)h, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    const float* p = image.data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[(size_t)x] = to_byte(p[(size_t)y * w + x]);
        png_write_row(wr.png, row.data());
    }
    png_write_end(wr.png, nullptr);
}

IdMask read_palette_mask(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    if (!looks_like_png(f.get()))
        throw InputError("annotation is not a PNG file: " + path.string());
    PngReader r;
    std::vector<std::vector<uint8_t>> rows;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(r.png)))
        throw InputError("corrupt PNG " + path.string() + ": " + r.ctx.errmsg);

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_PALETTE)
        throw InputError("annotation must be an indexed-palette PNG: " + path.string());
    if (png_get_bit_depth(r.png, r.info) < 8) png_set_packing(r.png);
    png_read_update_info(r.png, r.info);
    const int w = (int)png_get_image_width(r.png, r.info);
    const int h = (int)png_get_image_height(r.png, r.info);

    rows.resize((size_t)h);
    row_ptrs.resize((size_t)h);
    for (int y = 0; y < h; ++y) {
        rows[(size_t)y].resize((size_t)w);
        row_ptrs[(size_t)y] = rows[(size_t)y].data();
    }
    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);

    IdMask mask;
    mask.h = h;
    mask.w = w;
    mask.labels.resize((size_t)h * w);
    std::set<int> ids;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int v = rows[(size_t)y][(size_t)x];
            mask.labels[(size_t)y * w + x] = v;
            if (v != 0) ids.insert(v);
        }
    mask.object_ids.assign(ids.begin(), ids.end());
    mask.validate();
    return mask;
}

void write_palette_mask(const std::filesystem::path& path, const IdMask& mask,
                        const Palette& palette) {
    mask.validate();
    for (int32_t v : mask.labels)
        if (v < 0 || v >= (int)palette.size())
            throw InputError("write_palette_mask: label exceeds palette size");
    FilePtr f = open_file(path, "wb");
    PngWriter wr;
    std::vector<png_color> plte(palette.size());
    std::vector<uint8_t> row((size_t)mask.w);
    if (setjmp(png_jmpbuf(wr.png)))
        throw InputError("PNG write failed " + path.string() + ": " + wr.ctx.errmsg);
    png_init_io(wr.png, f.get());
    png_set_IHDR(wr.png, wr.info, (png_uint_32)mask.w, (png_uint_32)mask.h, 8,
                 PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (size_t i = 0; i < palette.size(); ++i)
        plte[i] = {palette[i][0], palette[i][1], palette[i][2]};
    png_set_PLTE(wr.png, wr.info, plte.data(), (int)plte.size());
    png_write_info(wr.png, wr.info);
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) row[(size_t)x] = (uint8_t)mask.at(y, x);
        png_write_row(wr.png, row.data());
    }
    png_write_end(wr.png, nullptr);
}

}  // namespace oasis
