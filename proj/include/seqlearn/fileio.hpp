#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seqlearn {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it into place; creates parent directories.
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_text(const std::filesystem::path& path, const std::string& text);

} // namespace seqlearn
