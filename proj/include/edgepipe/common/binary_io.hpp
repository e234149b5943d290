#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace edgepipe {

void put_u32_be(std::string& out, std::uint32_t v);
void put_u64_be(std::string& out, std::uint64_t v);
std::uint32_t get_u32_be(const unsigned char* p);
std::uint64_t get_u64_be(const unsigned char* p);

std::string to_hex(std::span<const unsigned char> bytes);
std::string to_hex(std::string_view bytes);
// Throws DataError on odd length or non-hex characters.
std::string from_hex(std::string_view hex);

std::string read_file(const std::filesystem::path& path);
// Writes to "<path>.tmp", flushes and renames over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace edgepipe
