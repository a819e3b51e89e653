#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <zlib.h>

#include "srvrc/objectives.hpp"

namespace srvrc {
namespace {

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

LibsvmDataset parse_libsvm(std::istream& in) {
  LibsvmDataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;

    LibsvmRow row;
    if (!parse_double(tok, row.label)) throw ParseError(lineno, "bad label '" + tok + "'");
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected idx:val, got '" + tok + "'");
      const std::string_view sv(tok);
      SparseEntry e{};
      if (!parse_index(sv.substr(0, colon), e.index) || e.index == 0)
        throw ParseError(lineno, "bad feature index in '" + tok + "'");
      if (!parse_double(sv.substr(colon + 1), e.value))
        throw ParseError(lineno, "bad feature value in '" + tok + "'");
      if (!row.features.empty() && e.index <= row.features.back().index)
        throw ParseError(lineno, "feature indices must be strictly increasing");
      row.features.push_back(e);
    }
    if (!row.features.empty()) data.d = std::max(data.d, row.features.back().index);
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) throw ParseError(lineno, "no data rows");
  return data;
}

LibsvmDataset load_libsvm(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("dataset not found: " + path.string());
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::string text;
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(f, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw std::runtime_error("gzip read error in " + path.string());
    std::istringstream in(text);
    return parse_libsvm(in);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_libsvm(in);
}

void write_libsvm(const LibsvmDataset& data, std::ostream& out) {
  out << std::setprecision(17);
  for (const auto& row : data.rows) {
    out << row.label;
    for (const auto& e : row.features) out << ' ' << e.index << ':' << e.value;
    out << '\n';
  }
}

void normalize_binary_labels(LibsvmDataset& data) {
  std::vector<double> labels;
  for (const auto& r : data.rows) labels.push_back(r.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  const bool already = std::all_of(labels.begin(), labels.end(),
                                   [](double y) { return y == 0.0 || y == 1.0; });
  if (already) return;
  if (labels.size() != 2)
    throw std::invalid_argument("binary objective needs exactly two distinct labels, found " +
                                std::to_string(labels.size()));
  for (auto& r : data.rows) r.label = r.label == labels[0] ? 0.0 : 1.0;
}

std::size_t remap_class_labels(LibsvmDataset& data) {
  std::map<double, std::size_t> ids;
  for (const auto& r : data.rows) ids.emplace(r.label, 0);
  std::size_t next = 1;
  for (auto& [label, id] : ids) id = next++;
  for (auto& r : data.rows) r.label = static_cast<double>(ids.at(r.label));
  return ids.size();
}

void scale_columns(LibsvmDataset& data) {
  std::vector<double> peak(data.d + 1, 0.0);
  for (const auto& r : data.rows)
    for (const auto& e : r.features) peak[e.index] = std::max(peak[e.index], std::abs(e.value));
  for (auto& r : data.rows)
    for (auto& e : r.features)
      if (peak[e.index] > 0.0) e.value /= peak[e.index];
}

}  // namespace srvrc
