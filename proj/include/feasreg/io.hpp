#pragma once

#include <string>

namespace feasreg {

// %.17g — round-trips doubles exactly, so rewritten files are bitwise identical
std::string fmt_g(double v);

// write to <path>.tmp then rename, so readers never see partial files
void write_file_atomic(const std::string& path, const std::string& content);

void ensure_parent_dir(const std::string& path);

}  // namespace feasreg
