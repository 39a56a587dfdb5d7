#pragma once

// Line-oriented text persistence for a trained classifier:
//
//   DDEMGM 1
//   config n=<n> s=<s> d=<d> tau=<t> r=<r> cells=<c1,...,cD>
//   class <label> geo=<G> trans=<T>
//   g <i1,...,iD> <count>                       (G lines)
//   t <from i1,...,iD>|<to i1,...,iD> <count>   (T lines)
//   ...
//   checksum <crc32 of every preceding byte, 8 hex digits>
//
// Classes are written in label order and cells in lexicographic order, so a
// model always serializes to the same bytes.

#include <algorithm>
#include <boost/crc.hpp>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddemgm/classifier.hpp"
#include "ddemgm/csv.hpp"
#include "ddemgm/error.hpp"
#include "ddemgm/mgm.hpp"

namespace ddemgm {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline void append_cell(std::string& out, const Cell& cell) {
  for (std::size_t k = 0; k < cell.dim(); ++k) {
    if (k > 0) out += ',';
    out += std::to_string(cell[k]);
  }
}

inline Cell parse_cell(std::string_view text, std::size_t dim, std::size_t line) {
  const auto parts = split(text, ',');
  if (parts.size() != dim) {
    throw Error(ErrorKind::Parse, "model line " + std::to_string(line) + ": cell has " +
                                      std::to_string(parts.size()) + " indices, expected " +
                                      std::to_string(dim));
  }
  std::vector<Cell::index_type> idx(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const auto [ptr, ec] = std::from_chars(parts[k].data(), parts[k].data() + parts[k].size(), idx[k]);
    if (ec != std::errc() || ptr != parts[k].data() + parts[k].size()) {
      throw Error(ErrorKind::Parse, "model line " + std::to_string(line) + ": bad cell index '" +
                                        std::string(parts[k]) + "'");
    }
  }
  return Cell(std::move(idx));
}

template <typename Int>
Int parse_int(std::string_view text, std::size_t line, const char* what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, "model line " + std::to_string(line) + ": bad " + what + " '" +
                                      std::string(text) + "'");
  }
  return v;
}

/// Value of `key=value` or throws.
inline std::string_view field(std::string_view token, std::string_view key, std::size_t line) {
  if (token.size() <= key.size() || token.substr(0, key.size()) != key ||
      token[key.size()] != '=') {
    throw Error(ErrorKind::Parse, "model line " + std::to_string(line) + ": expected " +
                                      std::string(key) + "=..., found '" + std::string(token) + "'");
  }
  return token.substr(key.size() + 1);
}

}  // namespace detail

inline std::string serialize_model(const OnlineClassifier& classifier) {
  const auto& cfg = classifier.config();
  std::string out = "DDEMGM " + std::to_string(kModelFormatVersion) + "\n";
  out += "config n=" + std::to_string(cfg.input_dim()) + " s=" + std::to_string(cfg.s) +
         " d=" + std::to_string(cfg.d) + " tau=" + std::to_string(cfg.tau) +
         " r=" + std::to_string(classifier.radius()) + " cells=";
  for (std::size_t k = 0; k < cfg.cell_sizes.size(); ++k) {
    if (k > 0) out += ',';
    out += detail::format_real(cfg.cell_sizes[k]);
  }
  out += '\n';

  classifier.with_models([&](const auto& models) {
    for (const auto& [label, model] : models) {
      if (label.empty() || label.find_first_of(" \t\r\n") != std::string::npos) {
        throw Error(ErrorKind::Shape, "label '" + label + "' cannot be stored in a model file");
      }
      std::vector<std::pair<Cell, std::uint64_t>> geo(model.geo_counts().begin(),
                                                      model.geo_counts().end());
      std::sort(geo.begin(), geo.end());
      std::vector<std::pair<std::pair<Cell, Cell>, std::uint64_t>> trans;
      trans.reserve(model.transition_pairs());
      for (const auto& [from, edges] : model.transitions()) {
        for (const auto& [to, count] : edges.to) trans.push_back({{from, to}, count});
      }
      std::sort(trans.begin(), trans.end());

      out += "class " + label + " geo=" + std::to_string(geo.size()) +
             " trans=" + std::to_string(trans.size()) + '\n';
      for (const auto& [cell, count] : geo) {
        out += "g ";
        detail::append_cell(out, cell);
        out += ' ' + std::to_string(count) + '\n';
      }
      for (const auto& [pair, count] : trans) {
        out += "t ";
        detail::append_cell(out, pair.first);
        out += '|';
        detail::append_cell(out, pair.second);
        out += ' ' + std::to_string(count) + '\n';
      }
    }
    return 0;
  });

  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08x", static_cast<unsigned>(detail::crc32(out)));
  out += "checksum ";
  out += hex;
  out += '\n';
  return out;
}

inline OnlineClassifier deserialize_model(std::string_view text) {
  // Integrity first: the checksum line must be the last line and must match.
  std::string_view body = text;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  const std::size_t last_nl = body.rfind('\n');
  const std::string_view last =
      last_nl == std::string_view::npos ? body : body.substr(last_nl + 1);
  if (last.substr(0, 9) != "checksum ") {
    throw Error(ErrorKind::Truncated, "model file has no checksum line");
  }
  const std::string_view covered =
      last_nl == std::string_view::npos ? std::string_view{} : text.substr(0, last_nl + 1);
  const std::string_view hex = detail::trim(last.substr(9));
  std::uint32_t stored = 0;
  {
    const auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), stored, 16);
    if (hex.size() != 8 || ec != std::errc() || ptr != hex.data() + hex.size()) {
      throw Error(ErrorKind::Truncated, "malformed checksum line");
    }
  }
  if (detail::crc32(covered) != stored) {
    throw Error(ErrorKind::ChecksumMismatch, "model file checksum does not match its contents");
  }

  auto lines = detail::split(covered, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t pos = 0;
  auto next = [&](const char* what) -> std::string_view {
    if (pos >= lines.size()) throw Error(ErrorKind::Truncated, std::string("missing ") + what);
    return lines[pos++];
  };

  {
    const auto head = detail::split(next("header"), ' ');
    if (head.size() != 2 || head[0] != "DDEMGM") throw Error(ErrorKind::Parse, "not a model file");
    const int version = detail::parse_int<int>(head[1], 1, "version");
    if (version != kModelFormatVersion) {
      throw Error(ErrorKind::VersionMismatch, "model format version " + std::to_string(version) +
                                                  ", expected " +
                                                  std::to_string(kModelFormatVersion));
    }
  }

  const auto cfg_tokens = detail::split(next("config"), ' ');
  if (cfg_tokens.size() != 7 || cfg_tokens[0] != "config") {
    throw Error(ErrorKind::Parse, "model line 2: malformed config");
  }
  const auto n = detail::parse_int<std::size_t>(detail::field(cfg_tokens[1], "n", 2), 2, "n");
  EmbeddingConfig cfg;
  cfg.s = detail::parse_int<std::size_t>(detail::field(cfg_tokens[2], "s", 2), 2, "s");
  cfg.d = detail::parse_int<std::size_t>(detail::field(cfg_tokens[3], "d", 2), 2, "d");
  cfg.tau = detail::parse_int<std::size_t>(detail::field(cfg_tokens[4], "tau", 2), 2, "tau");
  const int radius = detail::parse_int<int>(detail::field(cfg_tokens[5], "r", 2), 2, "r");
  for (auto part : detail::split(detail::field(cfg_tokens[6], "cells", 2), ',')) {
    double v = 0.0;
    if (!detail::parse_real(part, v)) throw Error(ErrorKind::Parse, "model line 2: bad cell size");
    cfg.cell_sizes.push_back(v);
  }
  if (cfg.cell_sizes.size() != n * cfg.d) {
    throw Error(ErrorKind::Parse, "model line 2: cells must list n*d sizes");
  }
  cfg.validate();
  const std::size_t dim = cfg.embedded_dim();

  OnlineClassifier classifier(cfg, radius);
  while (pos < lines.size()) {
    const std::size_t header_line = pos + 1;
    const auto tokens = detail::split(next("class"), ' ');
    if (tokens.size() != 4 || tokens[0] != "class" || tokens[1].empty()) {
      throw Error(ErrorKind::Parse, "model line " + std::to_string(header_line) +
                                        ": expected a class header");
    }
    const std::string label(tokens[1]);
    if (classifier.has_class(label)) {
      throw Error(ErrorKind::Parse, "model line " + std::to_string(header_line) +
                                        ": duplicate class '" + label + "'");
    }
    const auto geo_n = detail::parse_int<std::size_t>(detail::field(tokens[2], "geo", header_line),
                                                      header_line, "geo count");
    const auto trans_n = detail::parse_int<std::size_t>(
        detail::field(tokens[3], "trans", header_line), header_line, "trans count");

    ClassModel model(cfg);
    for (std::size_t i = 0; i < geo_n; ++i) {
      const std::size_t ln = pos + 1;
      const auto parts = detail::split(next("cell line"), ' ');
      if (parts.size() != 3 || parts[0] != "g") {
        throw Error(ErrorKind::Parse, "model line " + std::to_string(ln) + ": expected a g line");
      }
      const Cell cell = detail::parse_cell(parts[1], dim, ln);
      if (model.geo_counts().contains(cell)) {
        throw Error(ErrorKind::Parse, "model line " + std::to_string(ln) + ": duplicate cell");
      }
      model.restore_geo(cell, detail::parse_int<std::uint64_t>(parts[2], ln, "count"));
    }
    for (std::size_t i = 0; i < trans_n; ++i) {
      const std::size_t ln = pos + 1;
      const auto parts = detail::split(next("transition line"), ' ');
      if (parts.size() != 3 || parts[0] != "t") {
        throw Error(ErrorKind::Parse, "model line " + std::to_string(ln) + ": expected a t line");
      }
      const auto ends = detail::split(parts[1], '|');
      if (ends.size() != 2) {
        throw Error(ErrorKind::Parse, "model line " + std::to_string(ln) + ": expected from|to");
      }
      const Cell from = detail::parse_cell(ends[0], dim, ln);
      const Cell to = detail::parse_cell(ends[1], dim, ln);
      if (const auto it = model.transitions().find(from);
          it != model.transitions().end() && it->second.to.contains(to)) {
        throw Error(ErrorKind::Parse, "model line " + std::to_string(ln) + ": duplicate transition");
      }
      model.restore_transition(from, to, detail::parse_int<std::uint64_t>(parts[2], ln, "count"));
    }
    classifier.add_model(label, std::move(model));
  }
  return classifier;
}

inline void save_model(const OnlineClassifier& classifier, const std::string& path) {
  const std::string bytes = serialize_model(classifier);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Parse, "cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Parse, "short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error(ErrorKind::Parse, "cannot move model into '" + path + "'");
  }
}

inline OnlineClassifier load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace ddemgm
