#pragma once

// Long-form dataset CSV: header `series_id,label,v1,...,vn`, one sample per
// row, rows of a series contiguous and in time order.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddemgm/dataset.hpp"
#include "ddemgm/error.hpp"

namespace ddemgm {

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Parses a finite real; returns false on anything else.
inline bool parse_real(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

inline std::string format_real(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline Error parse_error(const std::string& source, std::size_t line, const std::string& what) {
  return Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  if (line_no == 0 || detail::trim(line).empty()) {
    throw Error(ErrorKind::EmptyInput, source + ": no header");
  }
  {
    const auto header = detail::split(detail::trim(line), ',');
    if (header.size() < 3 || detail::trim(header[0]) != "series_id" ||
        detail::trim(header[1]) != "label") {
      throw detail::parse_error(source, line_no, "header must be series_id,label,v1,...,vn");
    }
    columns = header.size();
  }

  Dataset data;
  data.dim = columns - 2;
  std::set<std::string> finished;
  std::vector<double> row(data.dim);
  LabeledSeries* current = nullptr;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto fields = detail::split(body, ',');
    if (fields.size() != columns) {
      throw detail::parse_error(source, line_no,
                                "expected " + std::to_string(columns) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    const std::string id(detail::trim(fields[0]));
    const std::string label(detail::trim(fields[1]));
    if (id.empty()) throw detail::parse_error(source, line_no, "empty series_id");
    if (label.empty()) throw detail::parse_error(source, line_no, "empty label");
    for (std::size_t k = 0; k < data.dim; ++k) {
      if (!detail::parse_real(fields[k + 2], row[k])) {
        throw detail::parse_error(source, line_no,
                                  "value '" + std::string(fields[k + 2]) + "' is not a finite number");
      }
    }
    if (current == nullptr || current->id != id) {
      if (current != nullptr) finished.insert(current->id);
      if (finished.contains(id)) {
        throw detail::parse_error(source, line_no,
                                  "rows of series '" + id + "' are not contiguous");
      }
      data.items.push_back({id, label, Series(data.dim)});
      current = &data.items.back();
    } else if (current->label != label) {
      throw detail::parse_error(source, line_no, "series '" + id + "' changes label");
    }
    current->series.push_back(row);
  }
  if (data.items.empty()) throw Error(ErrorKind::EmptyInput, source + ": dataset has no rows");
  return data;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path + "'");
  return parse_csv(in, path);
}

inline void write_csv(std::ostream& out, const Dataset& data) {
  out << "series_id,label";
  for (std::size_t k = 0; k < data.dim; ++k) out << ",v" << (k + 1);
  out << '\n';
  for (const auto& item : data.items) {
    for (const std::string* field : {&item.id, &item.label}) {
      if (field->find_first_of(",\n\r") != std::string::npos) {
        throw Error(ErrorKind::Shape, "identifier '" + *field + "' cannot be written as CSV");
      }
    }
    for (std::size_t t = 0; t < item.series.size(); ++t) {
      out << item.id << ',' << item.label;
      for (double v : item.series[t]) out << ',' << detail::format_real(v);
      out << '\n';
    }
  }
}

inline void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Parse, "cannot write '" + path + "'");
  write_csv(out, data);
}

}  // namespace ddemgm
