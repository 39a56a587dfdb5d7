// ddemgm: parameter selection, training, classification, evaluation and
// benchmarking from the command line.
//
// Reports go to stdout, one record per line, as space separated key=value
// pairs or (with --json) as JSON objects. Exit status: 0 ok, 2 unreadable
// input or bad arguments, 3 precondition or protocol failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddemgm/ddemgm.hpp"

namespace {

using namespace ddemgm;
using Record = nlohmann::ordered_json;

constexpr int kExitParse = 2;
constexpr int kExitPrecondition = 3;

bool g_json = false;

std::string plain_value(const Record& v) {
  if (!v.is_string()) return v.dump();
  const auto& s = v.get_ref<const std::string&>();
  if (!s.empty() && s.find_first_of(" \t\"=") == std::string::npos) return s;
  return v.dump();
}

void emit(const Record& rec) {
  if (g_json) {
    std::cout << rec.dump() << '\n';
    return;
  }
  bool first = true;
  for (const auto& [key, value] : rec.items()) {
    if (!first) std::cout << ' ';
    first = false;
    std::cout << key << '=' << plain_value(value);
  }
  std::cout << '\n';
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Truncated:
    case ErrorKind::ChecksumMismatch:
    case ErrorKind::VersionMismatch:
      return kExitParse;
    default:
      return kExitPrecondition;
  }
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (double x : v) {
    if (!out.empty()) out += ',';
    out += detail::format_real(x);
  }
  return out;
}

Sample parse_values(std::string_view text, std::size_t line) {
  Sample out;
  for (auto part : detail::split(text, ',')) {
    double v = 0.0;
    if (!detail::parse_real(part, v)) {
      throw detail::parse_error("<stdin>", line, "not a finite number: '" + std::string(part) + "'");
    }
    out.push_back(v);
  }
  return out;
}

bool blank(std::string_view line) { return detail::trim(line).empty(); }

// Labeled stdin lines `label,v1,...,vn`; a blank line ends the current series.
Dataset read_labeled_stdin(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t series_no = 0;
  std::optional<LabeledSeries> current;
  auto finish = [&] {
    if (current) data.add(std::move(*current));
    current.reset();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) {
      finish();
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) {
      throw detail::parse_error("<stdin>", line_no, "expected 'label,v1,...'");
    }
    const std::string label(detail::trim(std::string_view(line).substr(0, comma)));
    const Sample row = parse_values(std::string_view(line).substr(comma + 1), line_no);
    if (current && current->label != label) finish();
    if (!current) {
      if (data.dim != 0 && row.size() != data.dim) {
        throw detail::parse_error("<stdin>", line_no, "expected " + std::to_string(data.dim) + " values");
      }
      current = LabeledSeries{"stdin" + std::to_string(series_no++), label, Series(row.size())};
      if (data.dim == 0) data.dim = row.size();
    }
    if (row.size() != current->series.dim()) {
      throw detail::parse_error("<stdin>", line_no,
                                "expected " + std::to_string(current->series.dim()) + " values");
    }
    current->series.push_back(row);
  }
  finish();
  if (data.empty()) throw Error(ErrorKind::EmptyInput, "<stdin>: no samples");
  return data;
}

struct EmbeddingFlags {
  std::optional<std::size_t> s;
  std::optional<std::size_t> d;
  std::size_t bins = 50;
  std::size_t tau = 1;
  int radius = 1;
  std::size_t per_class = 5;
  std::uint64_t seed = 0;
};

// Explicit s/d win; anything missing comes from automatic selection.
EmbeddingConfig resolve_config(const Dataset& data, const EmbeddingFlags& f) {
  std::size_t s = f.s.value_or(0);
  std::size_t d = f.d.value_or(0);
  if (!f.s || !f.d) {
    SelectOptions opts;
    opts.per_class = f.per_class;
    opts.bins = f.bins;
    opts.tau = f.tau;
    opts.seed = f.seed;
    const auto sel = select_params(data, opts);
    if (!f.s) s = sel.s;
    if (!f.d) d = sel.d;
  }
  return EmbeddingConfig::replicated(s, d, f.tau, pooled_cell_sizes(data, f.bins, f.tau));
}

Record config_record(const char* report, const EmbeddingConfig& cfg, int radius) {
  Record r;
  r["report"] = report;
  r["n"] = cfg.input_dim();
  r["s"] = cfg.s;
  r["d"] = cfg.d;
  r["tau"] = cfg.tau;
  r["r"] = radius;
  r["cells"] = join(std::vector<double>(cfg.cell_sizes.begin(), cfg.cell_sizes.begin() + cfg.input_dim()));
  return r;
}

int run_select(const std::string& input, const EmbeddingFlags& f) {
  const Dataset data = load_csv(input);
  SelectOptions opts;
  opts.per_class = f.per_class;
  opts.bins = f.bins;
  opts.tau = f.tau;
  opts.seed = f.seed;
  const auto sel = select_params(data, opts);
  for (const auto& cls : sel.provenance) {
    for (const auto& one : cls.series) {
      Record r;
      r["report"] = "series";
      r["label"] = cls.label;
      r["series_id"] = one.id;
      r["freq_index"] = one.freq_index;
      r["s"] = one.s;
      r["d"] = one.d;
      r["reached_max"] = one.reached_max;
      emit(r);
    }
    Record r;
    r["report"] = "class";
    r["label"] = cls.label;
    r["series"] = cls.series.size();
    r["skipped"] = cls.skipped;
    r["mean_s"] = cls.mean_s;
    r["mean_d"] = cls.mean_d;
    emit(r);
  }
  Record r;
  r["report"] = "select-params";
  r["s"] = sel.s;
  r["d"] = sel.d;
  r["bins"] = f.bins;
  r["tau"] = f.tau;
  r["cells"] = join(sel.cell_sizes);
  emit(r);
  return 0;
}

int run_train(const std::optional<std::string>& input, bool from_stdin, const std::string& cells,
              const EmbeddingFlags& f, const std::string& model_path) {
  if (input.has_value() == from_stdin) {
    throw Error(ErrorKind::Protocol, "train needs exactly one of --input or --stdin");
  }
  std::vector<double> sizes;
  for (auto part : detail::split(cells, ',')) {
    if (cells.empty()) break;
    double v = 0.0;
    if (!detail::parse_real(part, v) || !(v > 0.0)) {
      throw Error(ErrorKind::Parse, "--cells: bad size '" + std::string(part) + "'");
    }
    sizes.push_back(v);
  }
  std::optional<OnlineClassifier> clf;
  std::size_t points = 0, series = 0;
  if (from_stdin && !sizes.empty()) {
    // Fixed grid: train sample by sample as lines arrive.
    clf.emplace(EmbeddingConfig::replicated(*f.s, *f.d, f.tau, sizes), f.radius);
    std::string line, label, open_label;
    std::size_t line_no = 0;
    auto close = [&] {
      if (open_label.empty()) return;
      clf->end_series(open_label);
      open_label.clear();
      ++series;
    };
    while (std::getline(std::cin, line)) {
      ++line_no;
      if (blank(line)) {
        close();
        continue;
      }
      const auto comma = line.find(',');
      if (comma == std::string::npos || comma == 0) {
        throw detail::parse_error("<stdin>", line_no, "expected 'label,v1,...'");
      }
      label = detail::trim(std::string_view(line).substr(0, comma));
      const Sample row = parse_values(std::string_view(line).substr(comma + 1), line_no);
      if (row.size() != sizes.size()) {
        throw detail::parse_error("<stdin>", line_no, "expected " + std::to_string(sizes.size()) + " values");
      }
      if (label != open_label) close();
      open_label = label;
      clf->train_point(label, row);
      ++points;
    }
    close();
    if (points == 0) throw Error(ErrorKind::EmptyInput, "<stdin>: no samples");
  } else {
    const Dataset data = from_stdin ? read_labeled_stdin(std::cin) : load_csv(*input);
    EmbeddingConfig cfg;
    if (!sizes.empty()) {
      if (sizes.size() != data.dim) throw Error(ErrorKind::Shape, "--cells needs one size per input dimension");
      cfg = EmbeddingConfig::replicated(*f.s, *f.d, f.tau, sizes);
    } else {
      cfg = resolve_config(data, f);
    }
    clf.emplace(cfg, f.radius);
    for (const auto& item : data.items) {
      clf->train_series(item.label, item.series);
      points += item.series.size();
    }
    series = data.size();
  }
  save_model(*clf, model_path);
  auto r = config_record("train", clf->config(), f.radius);
  r["series"] = series;
  r["points"] = points;
  r["classes"] = clf->class_count();
  r["distinct_cells"] = clf->distinct_cells();
  r["model_bytes"] = serialize_model(*clf).size();
  r["model"] = model_path;
  emit(r);
  return 0;
}

void emit_prediction(const std::string& series, const std::optional<std::string>& truth,
                     const std::optional<Prediction>& p, bool final) {
  Record r;
  r["report"] = final ? "prediction" : "progress";
  r["series"] = series;
  if (truth) r["label"] = *truth;
  r["t"] = p ? p->t : 0;
  r["predicted"] = p && p->label ? *p->label : kUndecided;
  if (p) {
    for (std::size_t i = 0; i < p->labels.size(); ++i) {
      const double v = p->scores[i].log_similarity();
      r["score." + p->labels[i]] = std::isfinite(v) ? Record(v) : Record("-inf");
    }
  }
  emit(r);
}

// Scores one series at a time and reports its predictions.
class SeriesScorer {
 public:
  SeriesScorer(OnlineClassifier& clf, std::size_t emit_every) : clf_(clf), emit_every_(emit_every) {}

  void begin(std::string id, std::optional<std::string> truth) {
    clf_.reset_scores();
    id_ = std::move(id);
    truth_ = std::move(truth);
    last_.reset();
    active_ = true;
  }

  void push(std::span<const double> sample) {
    auto p = clf_.classify_point(sample);
    if (!p) return;
    const bool fresh = !last_ || last_->t != p->t;
    last_ = std::move(p);
    if (emit_every_ > 0 && fresh && last_->t % emit_every_ == 0) emit_prediction(id_, truth_, last_, false);
  }

  void end() {
    if (!active_) return;
    emit_prediction(id_, truth_, last_, true);
    active_ = false;
  }

  bool active() const { return active_; }

 private:
  OnlineClassifier& clf_;
  std::size_t emit_every_;
  std::string id_;
  std::optional<std::string> truth_;
  std::optional<Prediction> last_;
  bool active_ = false;
};

int run_classify(const std::string& model_path, const std::optional<std::string>& input, bool from_stdin,
                 std::size_t emit_every) {
  if (input.has_value() == from_stdin) {
    throw Error(ErrorKind::Protocol, "classify needs exactly one of --input or --stdin");
  }
  OnlineClassifier clf = load_model(model_path);
  if (clf.class_count() == 0) throw Error(ErrorKind::EmptyModel, "model has no classes");
  SeriesScorer scorer(clf, emit_every);

  if (input) {
    const Dataset data = load_csv(*input);
    if (data.dim != clf.config().input_dim()) {
      throw Error(ErrorKind::Shape, "dataset has " + std::to_string(data.dim) + " dimensions, model expects " +
                                        std::to_string(clf.config().input_dim()));
    }
    for (const auto& item : data.items) {
      scorer.begin(item.id, item.label);
      for (std::size_t t = 0; t < item.series.size(); ++t) scorer.push(item.series[t]);
      scorer.end();
    }
    return 0;
  }

  const std::size_t dim = clf.config().input_dim();
  std::string line;
  std::size_t line_no = 0;
  std::size_t series_no = 0;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (blank(line)) {
      scorer.end();
      continue;
    }
    const Sample row = parse_values(line, line_no);
    if (row.size() != dim) {
      throw detail::parse_error("<stdin>", line_no, "expected " + std::to_string(dim) + " values");
    }
    if (!scorer.active()) scorer.begin("stdin" + std::to_string(series_no++), std::nullopt);
    scorer.push(row);
  }
  scorer.end();
  return 0;
}

int run_eval(const std::string& input, const std::string& protocol, const EmbeddingFlags& f, double split,
             bool parallel) {
  const Dataset data = load_csv(input);
  const EmbeddingConfig cfg = resolve_config(data, f);
  EvalOptions opts;
  opts.radius = f.radius;
  opts.seed = f.seed;
  opts.split = split;
  opts.parallel = parallel;
  const EvalReport report = protocol == "online" ? eval_online(data, cfg, opts) : eval_holdout(data, cfg, opts);
  for (const auto& [truth, row] : report.confusion) {
    for (const auto& [pred, n] : row) {
      Record r;
      r["report"] = "confusion";
      r["label"] = truth;
      r["predicted"] = pred;
      r["count"] = n;
      emit(r);
    }
  }
  for (std::size_t i = 0; i < report.curve.size(); ++i) {
    Record r;
    r["report"] = "curve";
    r["scored"] = i + 1;
    r["accuracy"] = report.curve[i];
    emit(r);
  }
  auto r = config_record("eval", cfg, f.radius);
  r["protocol"] = protocol;
  r["seed"] = report.seed;
  r["parallel"] = parallel;
  r["evaluated"] = report.evaluated;
  r["correct"] = report.correct;
  r["undecided"] = report.undecided;
  r["excluded"] = report.excluded;
  r["accuracy"] = report.accuracy;
  r["wall_seconds"] = report.wall_seconds;
  r["model_bytes"] = report.model_bytes;
  emit(r);
  return 0;
}

int run_bench(const std::string& input, const std::optional<std::string>& series_id, const std::string& sweep,
              const EmbeddingFlags& f, std::size_t repeats) {
  const Dataset data = load_csv(input);
  const LabeledSeries* chosen = nullptr;
  for (const auto& item : data.items) {
    if (series_id ? item.id == *series_id : item.series.size() >= kBenchPoints) {
      chosen = &item;
      break;
    }
  }
  if (chosen == nullptr) {
    throw Error(ErrorKind::Length, series_id ? "no series '" + *series_id + "'"
                                             : "no series with at least " + std::to_string(kBenchPoints) + " points");
  }
  BenchOptions opts;
  opts.s = f.s.value_or(1);
  opts.d = f.d.value_or(2);
  opts.tau = f.tau;
  opts.radius = f.radius;
  opts.repeats = repeats;
  opts.bins.clear();
  for (auto part : detail::split(sweep, ',')) {
    std::size_t b = 0;
    const auto text = detail::trim(part);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), b);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::Parse, "--bins-sweep: bad entry '" + std::string(part) + "'");
    }
    opts.bins.push_back(b);
  }
  for (const auto& b : bench_rate(chosen->series, opts)) {
    Record r;
    r["report"] = "bench";
    r["series"] = chosen->id;
    r["n"] = chosen->series.dim();
    r["s"] = opts.s;
    r["d"] = opts.d;
    r["bins"] = b.bins;
    r["points"] = b.points;
    r["seconds"] = b.seconds;
    r["rate"] = b.rate;
    r["distinct_cells"] = b.distinct_cells;
    r["model_bytes"] = b.model_bytes;
    emit(r);
  }
  return 0;
}

void add_embedding_flags(CLI::App* cmd, EmbeddingFlags& f, bool with_sd) {
  if (with_sd) {
    cmd->add_option("--s", f.s, "delay step")->check(CLI::PositiveNumber);
    cmd->add_option("--d", f.d, "embedding dimension")->check(CLI::PositiveNumber);
  }
  cmd->add_option("--bins", f.bins, "grid bins per dimension")->check(CLI::Range(2, 1 << 20));
  cmd->add_option("--tau", f.tau, "derivative lag")->check(CLI::PositiveNumber);
  cmd->add_option("--r", f.radius, "neighborhood radius in cells")->check(CLI::NonNegativeNumber);
  cmd->add_option("--per-class", f.per_class, "series drawn per class for parameter selection")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derivative delay embedding and Markov geographic model classifier"};
  app.require_subcommand(1);
  app.add_flag("--json", g_json, "emit JSON lines");

  EmbeddingFlags flags;
  std::string input;
  std::optional<std::string> opt_input;
  std::string model;
  bool from_stdin = false;

  auto* select = app.add_subcommand("select-params", "choose s, d and cell sizes from a dataset");
  select->add_option("--input", input, "dataset CSV")->required();
  add_embedding_flags(select, flags, false);

  std::string cells;
  auto* train = app.add_subcommand("train", "train per-class models and save them");
  train->add_option("--input", opt_input, "dataset CSV");
  train->add_flag("--stdin", from_stdin, "read 'label,v1,...' lines; blank line ends a series");
  add_embedding_flags(train, flags, true);
  train->add_option("--cells", cells, "explicit cell sizes, one per input dimension (needs --s and --d)");
  train->add_option("--model", model, "output model file")->required();

  std::size_t emit_every = 0;
  auto* classify = app.add_subcommand("classify", "classify series with a saved model");
  classify->add_option("--model", model, "model file")->required();
  classify->add_option("--input", opt_input, "dataset CSV");
  classify->add_flag("--stdin", from_stdin, "read 'v1,...' lines; blank line ends a series");
  classify->add_option("--emit-every", emit_every, "also report every K scored states");

  std::string protocol;
  double split = 0.5;
  bool parallel = false;
  auto* eval = app.add_subcommand("eval", "evaluate accuracy with a seeded protocol");
  eval->add_option("--input", input, "dataset CSV")->required();
  eval->add_option("--protocol", protocol, "holdout50 or online")
      ->required()
      ->check(CLI::IsMember({"holdout50", "online"}));
  eval->add_option("--split", split, "training fraction for holdout")->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--parallel", parallel, "run training and classification on two actors");
  add_embedding_flags(eval, flags, true);

  std::string sweep = "20,30,40,50,60";
  std::optional<std::string> series_id;
  std::size_t repeats = 5;
  auto* bench = app.add_subcommand("bench", "training rate and model size across grid bins");
  bench->add_option("--input", input, "dataset CSV")->required();
  bench->add_option("--series", series_id, "series to benchmark (default: first with 10^4 points)");
  bench->add_option("--bins-sweep", sweep, "comma separated grid bins");
  bench->add_option("--repeats", repeats, "timed repetitions per setting")->check(CLI::PositiveNumber);
  add_embedding_flags(bench, flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  try {
    if (*select) return run_select(input, flags);
    if (*train) {
      if (!cells.empty() && !(flags.s && flags.d)) {
        throw Error(ErrorKind::Protocol, "--cells needs --s and --d");
      }
      return run_train(opt_input, from_stdin, cells, flags, model);
    }
    if (*classify) return run_classify(model, opt_input, from_stdin, emit_every);
    if (*eval) return run_eval(input, protocol, flags, split, parallel);
    if (*bench) return run_bench(input, series_id, sweep, flags, repeats);
  } catch (const Error& e) {
    std::cerr << "ddemgm: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ddemgm: " << e.what() << '\n';
    return kExitPrecondition;
  }
  return 0;
}
