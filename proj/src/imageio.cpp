#include "msba/imageio.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace msba::io {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

void write_png_impl(const std::filesystem::path& path, const uint8_t* bytes, int h, int w,
                    int channels, int bit_depth) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write error: " + path.string());
  }
  png_init_io(png, f.get());
  const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, w, h, bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = static_cast<size_t>(w) * channels * (bit_depth / 8);
  for (int y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngData {
  std::vector<uint8_t> bytes;
  int h = 0, w = 0, channels = 0, bit_depth = 0;
};

PngData read_png_impl(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read error: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  PngData out;
  out.w = png_get_image_width(png, info);
  out.h = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.h);
  for (int y = 0; y < out.h; ++y) png_read_row(png, out.bytes.data() + y * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.c != 3) throw std::invalid_argument("write_png expects 3 channels");
  const auto bytes = to_bytes(img);
  write_png_impl(path, bytes.data(), img.h, img.w, 3, 8);
}

Image read_png(const std::filesystem::path& path) {
  PngData d = read_png_impl(path);
  if (d.bit_depth != 8 || d.channels != 3)
    throw std::runtime_error("expected 8-bit RGB png: " + path.string());
  return from_bytes(d.bytes, d.h, d.w, 3);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  std::vector<uint8_t> bytes(mask.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  write_png_impl(path, bytes.data(), mask.h, mask.w, 1, 8);
}

Mask read_mask_png(const std::filesystem::path& path) {
  PngData d = read_png_impl(path);
  if (d.bit_depth != 8 || d.channels != 1)
    throw std::runtime_error("expected 8-bit gray png: " + path.string());
  Mask m(d.h, d.w);
  for (size_t i = 0; i < d.bytes.size(); ++i) m.data[i] = d.bytes[i] >= 128 ? 1 : 0;
  return m;
}

void write_map_png16(const std::filesystem::path& path, const Mat& map, double scale) {
  std::vector<uint8_t> bytes(static_cast<size_t>(map.rows) * map.cols * 2);
  for (int i = 0; i < map.rows; ++i) {
    for (int j = 0; j < map.cols; ++j) {
      const double x = map.at(i, j) * scale * 65535.0;
      const long q = std::clamp(std::lround(x), 0l, 65535l);
      // PNG stores 16-bit samples big-endian.
      bytes[(static_cast<size_t>(i) * map.cols + j) * 2] = static_cast<uint8_t>(q >> 8);
      bytes[(static_cast<size_t>(i) * map.cols + j) * 2 + 1] = static_cast<uint8_t>(q & 0xFF);
    }
  }
  write_png_impl(path, bytes.data(), map.rows, map.cols, 1, 16);
}

Mat read_map_png16(const std::filesystem::path& path) {
  PngData d = read_png_impl(path);
  if (d.bit_depth != 16 || d.channels != 1)
    throw std::runtime_error("expected 16-bit gray png: " + path.string());
  Mat m(d.h, d.w);
  for (int i = 0; i < d.h; ++i) {
    for (int j = 0; j < d.w; ++j) {
      const size_t k = (static_cast<size_t>(i) * d.w + j) * 2;
      const uint16_t q = static_cast<uint16_t>((d.bytes[k] << 8) | d.bytes[k + 1]);
      m.at(i, j) = q / 65535.0;
    }
  }
  return m;
}

void write_fimp(const std::filesystem::path& path, const std::vector<float>& values,
                uint32_t h, uint32_t w, uint32_t c) {
  if (values.size() != static_cast<size_t>(h) * w * c)
    throw std::invalid_argument("write_fimp: size mismatch");
  FilePtr f = open_file(path, "wb");
  const char magic[4] = {'F', 'I', 'M', 'P'};
  std::fwrite(magic, 1, 4, f.get());
  const uint32_t dims[3] = {h, w, c};
  std::fwrite(dims, 4, 3, f.get());
  std::fwrite(values.data(), 4, values.size(), f.get());
}

std::vector<float> read_fimp(const std::filesystem::path& path, uint32_t& h, uint32_t& w,
                             uint32_t& c) {
  FilePtr f = open_file(path, "rb");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "FIMP", 4) != 0)
    throw std::runtime_error("bad fimp magic: " + path.string());
  uint32_t dims[3];
  if (std::fread(dims, 4, 3, f.get()) != 3)
    throw std::runtime_error("bad fimp header: " + path.string());
  h = dims[0];
  w = dims[1];
  c = dims[2];
  std::vector<float> values(static_cast<size_t>(h) * w * c);
  if (std::fread(values.data(), 4, values.size(), f.get()) != values.size())
    throw std::runtime_error("truncated fimp data: " + path.string());
  return values;
}

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jmp;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jmp, 1);
}

}  // namespace

Image jpeg_roundtrip(const Image& img, int quality) {
  if (img.c != 3) throw std::invalid_argument("jpeg_roundtrip expects 3 channels");
  quality = std::clamp(quality, 1, 100);
  const auto bytes = to_bytes(img);

  // Encode.
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  unsigned char* buf = nullptr;
  unsigned long buf_size = 0;
  if (setjmp(jerr.jmp)) {
    jpeg_destroy_compress(&cinfo);
    if (buf) free(buf);
    throw std::runtime_error("jpeg encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &buf_size);
  cinfo.image_width = img.w;
  cinfo.image_height = img.h;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const size_t stride = static_cast<size_t>(img.w) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(bytes.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  // Decode.
  jpeg_decompress_struct dinfo;
  JpegErrorMgr derr;
  dinfo.err = jpeg_std_error(&derr.pub);
  derr.pub.error_exit = jpeg_error_exit;
  if (setjmp(derr.jmp)) {
    jpeg_destroy_decompress(&dinfo);
    free(buf);
    throw std::runtime_error("jpeg decode failed");
  }
  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, buf, buf_size);
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&dinfo);
  std::vector<uint8_t> out_bytes(static_cast<size_t>(img.h) * img.w * 3);
  while (dinfo.output_scanline < dinfo.output_height) {
    JSAMPROW row = out_bytes.data() + dinfo.output_scanline * stride;
    jpeg_read_scanlines(&dinfo, &row, 1);
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  free(buf);

  return from_bytes(out_bytes, img.h, img.w, 3);
}

}  // namespace msba::io
