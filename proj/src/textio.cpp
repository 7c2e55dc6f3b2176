#include "ns/textio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ns {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void KeyValueDoc::add(std::string key, std::string value) {
  entries_.emplace_back(std::move(key), std::move(value));
}

void KeyValueDoc::add_int(std::string key, std::int64_t value) {
  add(std::move(key), std::to_string(value));
}

void KeyValueDoc::add_double(std::string key, double value) {
  add(std::move(key), format_double(value));
}

bool KeyValueDoc::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

const std::string& KeyValueDoc::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw FormatError("missing key: " + key);
}

std::string KeyValueDoc::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

std::int64_t KeyValueDoc::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw FormatError("key '" + key + "' is not an integer: " + v);
  return out;
}

std::uint64_t KeyValueDoc::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw FormatError("key '" + key + "' is not an unsigned integer: " + v);
  return out;
}

double KeyValueDoc::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw FormatError("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw FormatError("key '" + key + "' is not a number: " + v);
  }
}

std::vector<std::string> KeyValueDoc::get_all(const std::string& key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_)
    if (k == key) out.push_back(v);
  return out;
}

std::string KeyValueDoc::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueDoc::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot open file for writing: " + path.string());
  const std::string text = to_string();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw StorageError("write failed: " + path.string());
}

KeyValueDoc KeyValueDoc::parse(const std::string& text, const std::string& origin) {
  KeyValueDoc doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
    doc.add(std::move(key), std::move(value));
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace ns
