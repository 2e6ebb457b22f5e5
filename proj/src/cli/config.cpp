#include "ecl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ecl::cli {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

long parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw ConfigError(key + ": trailing characters in '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "task.kind") c.task_kind = value;
    else if (key == "task.n_per_domain") c.n_per_domain = static_cast<int>(parse_integer(key, value));
    else if (key == "task.dimension") c.dimension = static_cast<int>(parse_integer(key, value));
    else if (key == "task.classes") c.classes = static_cast<int>(parse_integer(key, value));
    else if (key == "task.boundary") c.boundary = value;
    else if (key == "task.boundary_scale") c.boundary_scale = parse_number(key, value);
    else if (key == "task.source_mean") c.source_mean = parse_list(key, value);
    else if (key == "task.target_mean") c.target_mean = parse_list(key, value);
    else if (key == "task.cov_diag") c.cov_diag = parse_list(key, value);
    else if (key == "task.source_box") c.source_box = parse_list(key, value);
    else if (key == "task.target_box") c.target_box = parse_list(key, value);
    else if (key == "model.hidden") c.hidden = static_cast<int>(parse_integer(key, value));
    else if (key == "train.epochs") c.epochs = static_cast<int>(parse_integer(key, value));
    else if (key == "train.batch_size") c.batch_size = static_cast<int>(parse_integer(key, value));
    else if (key == "train.learning_rate") c.learning_rate = parse_number(key, value);
    else if (key == "train.seed") c.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "train.calib_epochs") c.calib_epochs = static_cast<int>(parse_integer(key, value));
    else if (key == "train.ecl_epochs") c.ecl_epochs = static_cast<int>(parse_integer(key, value));
    else if (key == "train.aux_holdout") c.aux_holdout = parse_integer(key, value) != 0;
    else if (key == "train.holdout_fraction") c.holdout_fraction = parse_number(key, value);
    else if (key == "train.head_steps") c.head_steps = static_cast<int>(parse_integer(key, value));
    else if (key == "train.ecl_warmup_epochs") c.ecl_warmup_epochs = static_cast<int>(parse_integer(key, value));
    else if (key == "loss.paradigm") c.paradigm = value;
    else if (key == "loss.bins") c.bins = static_cast<int>(parse_integer(key, value));
    else if (key == "loss.simplex_resolution") c.simplex_resolution = static_cast<int>(parse_integer(key, value));
    else if (key == "loss.tau") c.tau = value == "auto" ? 0.0 : parse_number(key, value);
    else if (key == "loss.epsilon") c.epsilon = parse_number(key, value);
    else if (key == "loss.alpha_ema") c.alpha_ema = parse_number(key, value);
    else if (key == "loss.n_prox") c.n_prox = static_cast<int>(parse_integer(key, value));
    else if (key == "loss.gamma") c.gamma = parse_number(key, value);
    else if (key == "loss.lambda_cap") c.lambda_cap = parse_number(key, value);
    else if (key == "metrics.bins") c.metric_bins = static_cast<int>(parse_integer(key, value));
    else if (key == "run.arms") c.arms = value;
    else if (key == "run.n_seeds") c.n_seeds = static_cast<int>(parse_integer(key, value));
    else if (key == "output.dir") c.out_dir = value;
    else throw ConfigError("unknown config key: " + key);
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_text(const Config& c) {
  std::ostringstream out;
  out << "task.kind = " << c.task_kind << '\n';
  out << "task.n_per_domain = " << c.n_per_domain << '\n';
  out << "task.dimension = " << c.dimension << '\n';
  out << "task.classes = " << c.classes << '\n';
  out << "task.boundary = " << c.boundary << '\n';
  out << "task.boundary_scale = " << format_double(c.boundary_scale) << '\n';
  out << "task.source_mean = " << join(c.source_mean) << '\n';
  out << "task.target_mean = " << join(c.target_mean) << '\n';
  out << "task.cov_diag = " << join(c.cov_diag) << '\n';
  out << "task.source_box = " << join(c.source_box) << '\n';
  out << "task.target_box = " << join(c.target_box) << '\n';
  out << "model.hidden = " << c.hidden << '\n';
  out << "train.epochs = " << c.epochs << '\n';
  out << "train.batch_size = " << c.batch_size << '\n';
  out << "train.learning_rate = " << format_double(c.learning_rate) << '\n';
  out << "train.seed = " << c.seed << '\n';
  out << "train.calib_epochs = " << c.calib_epochs << '\n';
  out << "train.ecl_epochs = " << c.ecl_epochs << '\n';
  out << "train.aux_holdout = " << (c.aux_holdout ? 1 : 0) << '\n';
  out << "train.holdout_fraction = " << format_double(c.holdout_fraction) << '\n';
  out << "train.head_steps = " << c.head_steps << '\n';
  out << "train.ecl_warmup_epochs = " << c.ecl_warmup_epochs << '\n';
  out << "loss.paradigm = " << c.paradigm << '\n';
  out << "loss.bins = " << c.bins << '\n';
  out << "loss.simplex_resolution = " << c.simplex_resolution << '\n';
  out << (c.tau <= 0.0 ? std::string("loss.tau = auto")
                       : "loss.tau = " + format_double(c.tau))
      << '\n';
  out << "loss.epsilon = " << format_double(c.epsilon) << '\n';
  out << "loss.alpha_ema = " << format_double(c.alpha_ema) << '\n';
  out << "loss.n_prox = " << c.n_prox << '\n';
  out << "loss.gamma = " << format_double(c.gamma) << '\n';
  out << "loss.lambda_cap = " << format_double(c.lambda_cap) << '\n';
  out << "metrics.bins = " << c.metric_bins << '\n';
  out << "run.arms = " << c.arms << '\n';
  out << "run.n_seeds = " << c.n_seeds << '\n';
  out << "output.dir = " << c.out_dir << '\n';
  return out.str();
}

void save_config(const std::string& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << config_text(config);
}

void Config::validate() const {
  if (task_kind != "gaussian" && task_kind != "uniform")
    throw ConfigError("task.kind must be gaussian or uniform");
  if (boundary != "sin-logistic")
    throw ConfigError("task.boundary: only sin-logistic is implemented");
  if (boundary_scale <= 0.0) throw ConfigError("task.boundary_scale must be > 0");
  if (n_per_domain < 1) throw ConfigError("task.n_per_domain must be >= 1");
  if (dimension != 2) throw ConfigError("task.dimension: only 2 is implemented");
  if (classes != 2) throw ConfigError("task.classes: only 2 is implemented");
  if (hidden < 1) throw ConfigError("model.hidden must be >= 1");
  if (epochs < 1 || batch_size < 1) throw ConfigError("train.epochs/batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train.learning_rate must be > 0");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
    throw ConfigError("train.holdout_fraction must be in (0,1)");
  if (head_steps < 1) throw ConfigError("train.head_steps must be >= 1");
  try {
    paradigm_from_string(paradigm);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (bins < 1 || metric_bins < 1) throw ConfigError("bins must be >= 1");
  if (simplex_resolution < 1) throw ConfigError("loss.simplex_resolution must be >= 1");
  if (epsilon <= 0.0) throw ConfigError("loss.epsilon must be > 0");
  if (alpha_ema <= 0.0 || alpha_ema > 1.0) throw ConfigError("loss.alpha_ema must be in (0,1]");
  if (n_prox < 1) throw ConfigError("loss.n_prox must be >= 1");
  if (lambda_cap <= 0.0) throw ConfigError("loss.lambda_cap must be > 0");
  if (n_seeds < 1) throw ConfigError("run.n_seeds must be >= 1");
}

sim::CovariateShiftTask Config::make_task(std::uint64_t task_seed) const {
  sim::CovariateShiftTask t;
  t.kind = task_kind == "gaussian" ? sim::CovariateShiftTask::Kind::kGaussian
                                   : sim::CovariateShiftTask::Kind::kUniform;
  t.dimension = dimension;
  t.classes = classes;
  t.seed = task_seed;
  t.source_mean = source_mean;
  t.target_mean = target_mean;
  t.cov_diag = cov_diag;
  t.source_lo = {source_box[0], source_box[0]};
  t.source_hi = {source_box[1], source_box[1]};
  t.target_lo = {target_box[0], target_box[0]};
  t.target_hi = {target_box[1], target_box[1]};
  t.boundary_scale = boundary_scale;
  return t;
}

}  // namespace ecl::cli
