#include "salvo/pnm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

namespace salvo {

namespace {

// Skips whitespace and `#` comments between header tokens.
int nextHeaderInt(std::istream& in, const std::string& path) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value;
  if (!(in >> value)) throw InputError(path + ": malformed PNM header");
  return value;
}

struct PnmData {
  Image gray;  // luminance for color inputs
  int maxval = 255;
};

PnmData readPnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '2' && m1 != '3' && m1 != '5' && m1 != '6'))
    throw InputError(path + ": unsupported image format (expected PGM/PPM)");
  const bool ascii = m1 == '2' || m1 == '3';
  const bool color = m1 == '3' || m1 == '6';

  const int w = nextHeaderInt(in, path);
  const int h = nextHeaderInt(in, path);
  const int maxval = nextHeaderInt(in, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
    throw InputError(path + ": invalid PNM dimensions/maxval");
  in.get();  // single whitespace after maxval

  const int channels = color ? 3 : 1;
  const size_t count = size_t(w) * size_t(h) * size_t(channels);
  std::vector<double> samples(count);
  if (ascii) {
    for (size_t i = 0; i < count; ++i) {
      int v;
      if (!(in >> v)) throw InputError(path + ": truncated ASCII PNM");
      samples[i] = v;
    }
  } else if (maxval < 256) {
    std::vector<uint8_t> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), long(count));
    if (size_t(in.gcount()) != count) throw InputError(path + ": truncated binary PNM");
    for (size_t i = 0; i < count; ++i) samples[i] = buf[i];
  } else {
    std::vector<uint8_t> buf(count * 2);
    in.read(reinterpret_cast<char*>(buf.data()), long(count * 2));
    if (size_t(in.gcount()) != count * 2) throw InputError(path + ": truncated binary PNM");
    for (size_t i = 0; i < count; ++i)
      samples[i] = double((uint16_t(buf[2 * i]) << 8) | uint16_t(buf[2 * i + 1]));
  }

  PnmData out;
  out.maxval = maxval;
  out.gray.resize(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = (size_t(y) * size_t(w) + size_t(x)) * size_t(channels);
      out.gray(y, x) = color ? 0.299 * samples[i] + 0.587 * samples[i + 1] +
                                   0.114 * samples[i + 2]
                             : samples[i];
    }
  return out;
}

}  // namespace

Image readImage(const std::string& path, bool scale16) {
  PnmData d = readPnm(path);
  if (d.maxval > 255 && scale16) d.gray *= 255.0 / double(d.maxval);
  return d.gray;
}

Image readRaw(const std::string& path) { return readPnm(path).gray; }

void writePgm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  std::vector<uint8_t> buf(size_t(img.size()));
  size_t i = 0;
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x)
      buf[i++] = uint8_t(std::clamp(std::lround(double(img(y, x))), 0L, 255L));
  out.write(reinterpret_cast<const char*>(buf.data()), long(buf.size()));
}

void writePgm16(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P5\n" << img.cols() << " " << img.rows() << "\n65535\n";
  std::vector<uint8_t> buf(size_t(img.size()) * 2);
  size_t i = 0;
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x) {
      const uint16_t v = uint16_t(std::clamp(std::lround(double(img(y, x))), 0L, 65535L));
      buf[i++] = uint8_t(v >> 8);
      buf[i++] = uint8_t(v & 0xFF);
    }
  out.write(reinterpret_cast<const char*>(buf.data()), long(buf.size()));
}

Image readPfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw InputError(path + ": expected grayscale PFM");
  int w, h;
  double scale;
  in >> w >> h >> scale;
  in.get();
  Image img(h, w);
  std::vector<float> row(static_cast<size_t>(w));
  for (int y = h - 1; y >= 0; --y) {  // PFM rows are bottom-up
    in.read(reinterpret_cast<char*>(row.data()), long(size_t(w) * sizeof(float)));
    if (size_t(in.gcount()) != size_t(w) * sizeof(float))
      throw InputError(path + ": truncated PFM");
    for (int x = 0; x < w; ++x) img(y, x) = row[size_t(x)];
  }
  return img;
}

void writePfm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "Pf\n" << img.cols() << " " << img.rows() << "\n-1.0\n";  // little endian
  std::vector<float> row(static_cast<size_t>(img.cols()));
  for (int y = int(img.rows()) - 1; y >= 0; --y) {
    for (int x = 0; x < img.cols(); ++x) row[size_t(x)] = img(y, x);
    out.write(reinterpret_cast<const char*>(row.data()), long(row.size() * sizeof(float)));
  }
}

}  // namespace salvo
