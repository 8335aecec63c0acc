#pragma once

#include <string>

#include "salvo/types.hpp"

namespace salvo {

/// Netpbm image I/O: PGM (P2/P5, 8- or 16-bit), PPM (P3/P6, converted to
/// luminance with weights 0.299/0.587/0.114) and grayscale PFM floats.

/// Reads a PGM/PPM as an intensity grid. 16-bit values are scaled to [0,255]
/// when scale16 is true, otherwise returned raw.
Image readImage(const std::string& path, bool scale16 = true);

/// Reads a single-channel PGM keeping raw sample values (label maps, vignettes).
Image readRaw(const std::string& path);

/// 8-bit binary PGM; values are clamped and rounded.
void writePgm(const std::string& path, const Image& img);

/// 16-bit binary PGM (big-endian samples); values clamped to [0, 65535].
void writePgm16(const std::string& path, const Image& img);

Image readPfm(const std::string& path);
void writePfm(const std::string& path, const Image& img);

}  // namespace salvo
