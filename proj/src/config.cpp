#include "aseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "aseg/trace.hpp"

namespace aseg {

std::string to_string(Tuning t) {
  switch (t) {
    case Tuning::Set1:
      return "set1";
    case Tuning::Set2:
      return "set2";
    case Tuning::Convex:
      return "convex";
    case Tuning::Manual:
      return "manual";
  }
  return "set1";
}

Tuning parse_tuning(const std::string& s) {
  if (s == "set1") return Tuning::Set1;
  if (s == "set2") return Tuning::Set2;
  if (s == "convex") return Tuning::Convex;
  if (s == "manual") return Tuning::Manual;
  throw ConfigError("unknown tuning '" + s + "' (expected set1, set2, convex or manual)");
}

const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"data.path", "libsvm file to load (excludes synth.*)"},
      {"synth.d", "synthetic quadratic: dimension (selects the synthetic source)"},
      {"synth.points_per_node", "synthetic: rows per node"},
      {"synth.hetero", "synthetic: spread of node covariances and targets"},
      {"synth.seed", "synthetic: generator seed"},
      {"synth.condition", "synthetic: eigenvalue spread of the shared covariance"},
      {"synth.label_noise", "synthetic: label noise stddev"},
      {"synth.exact_gram", "synthetic: d deterministic rows per node (true/false)"},
      {"loss", "quadratic | logistic"},
      {"lambda", "l2 weight; auto = L/100"},
      {"mu", "strong convexity override; auto = estimated"},
      {"delta", "similarity override; auto = estimated"},
      {"fed.M", "number of nodes including the server"},
      {"fed.N", "batches merged into the server (file data)"},
      {"fed.B", "nodes sampled per round"},
      {"fed.replacement", "sample with replacement (true/false)"},
      {"fed.mode", "sampled | full"},
      {"fed.reweight", "scale s_k by (M-1)/M (true/false)"},
      {"partition.seed", "shuffle seed for the batch split"},
      {"noise.kind", "none | gaussian | uniform"},
      {"noise.scale", "gaussian stddev or uniform half-width"},
      {"tuning", "set1 | set2 | convex | manual"},
      {"tuning.theta", "theta; auto = preset default"},
      {"tuning.tau", "manual tuning: tau"},
      {"tuning.eta", "manual tuning: eta"},
      {"tuning.alpha", "manual tuning: alpha"},
      {"convex.eta_rule", "proof (theta/(2 tau)) | statement (theta/tau)"},
      {"solver.kind", "sgd | svrg | sarah | exact"},
      {"solver.step", "step size; auto = per-solver default"},
      {"solver.epoch", "inner steps per epoch; auto = factor 0.5 rule"},
      {"solver.iters", "SGD steps or SVRG/SARAH epochs"},
      {"solver.minibatch", "component gradients per step (0 = full)"},
      {"solver.schedule", "constant | decreasing (SGD)"},
      {"solver.stop", "fixed | surrogate"},
      {"solver.last_iterate", "SVRG returns the last inner iterate (true/false)"},
      {"solver.exact_tol", "gradient tolerance of the exact solver"},
      {"iterations", "outer iterations N"},
      {"seeds", "comma-separated master seeds"},
      {"output", "output directory"},
      {"trace.wall_time", "record wall-clock milliseconds (true/false)"},
      {"trace.blind", "trace ||grad r||^2 instead of reference distances (true/false)"},
      {"delta.points", "sample points for the logistic delta estimate"},
      {"delta.radius", "sampling radius around x*; auto = ||x*||/10 + 0.1"},
      {"delta.safety", "multiplier applied to the delta estimate"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  if (b != e && *b == '+') ++b;
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc() || res.ptr != e || b == e)
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::optional<double> to_auto_double(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_double(key, v);
}

std::vector<std::uint64_t> to_seed_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_uint(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": at least one seed is required");
  return out;
}

SynthSpec& synth_of(RunConfig& c) {
  if (!c.synth) c.synth = SynthSpec{};
  return *c.synth;
}

}  // namespace

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + s + "'");
  auto key = trim(s.substr(0, eq));
  auto val = trim(s.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + s + "'");
  return {key, val};
}

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      kv.push_back(split_assignment(line));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(ln) + ": " + e.what());
    }
  }
  return kv;
}

KeyValues read_key_values_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  return read_key_values(f);
}

RunConfig build_config(const KeyValues& kv) {
  RunConfig c;
  bool synth_keys = false;
  for (const auto& [k, v] : kv) {
    if (!config_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
    if (k.rfind("synth.", 0) == 0) synth_keys = true;

    if (k == "data.path") c.data_path = v;
    else if (k == "synth.d") synth_of(c).d = to_uint(k, v);
    else if (k == "synth.points_per_node") synth_of(c).points_per_node = to_uint(k, v);
    else if (k == "synth.hetero") synth_of(c).hetero = to_double(k, v);
    else if (k == "synth.seed") synth_of(c).seed = to_uint(k, v);
    else if (k == "synth.condition") synth_of(c).condition = to_double(k, v);
    else if (k == "synth.label_noise") synth_of(c).label_noise = to_double(k, v);
    else if (k == "synth.exact_gram") synth_of(c).exact_gram = to_bool(k, v);
    else if (k == "loss") c.loss = parse_loss_kind(v);
    else if (k == "lambda") c.lambda = to_auto_double(k, v);
    else if (k == "mu") c.mu = to_auto_double(k, v);
    else if (k == "delta") c.delta = to_auto_double(k, v);
    else if (k == "fed.M") c.M = to_uint(k, v);
    else if (k == "fed.N") c.N = to_uint(k, v);
    else if (k == "fed.B") c.plan.B = to_uint(k, v);
    else if (k == "fed.replacement") c.plan.replacement = to_bool(k, v);
    else if (k == "fed.mode") {
      if (v == "sampled") c.plan.mode = Participation::Sampled;
      else if (v == "full") c.plan.mode = Participation::Full;
      else throw ConfigError("fed.mode: expected sampled or full, got '" + v + "'");
    }
    else if (k == "fed.reweight") c.plan.reweight_server_pool = to_bool(k, v);
    else if (k == "partition.seed") c.partition_seed = to_uint(k, v);
    else if (k == "noise.kind") c.noise.kind = parse_noise_kind(v);
    else if (k == "noise.scale") c.noise.scale = to_double(k, v);
    else if (k == "tuning") c.tuning = parse_tuning(v);
    else if (k == "tuning.theta") c.theta = to_auto_double(k, v);
    else if (k == "tuning.tau") c.tau = to_double(k, v);
    else if (k == "tuning.eta") c.eta = to_double(k, v);
    else if (k == "tuning.alpha") c.alpha = to_double(k, v);
    else if (k == "convex.eta_rule") {
      if (v == "proof") c.eta_rule = EtaRule::Proof;
      else if (v == "statement") c.eta_rule = EtaRule::Statement;
      else throw ConfigError("convex.eta_rule: expected proof or statement, got '" + v + "'");
    }
    else if (k == "solver.kind") c.solver.kind = parse_solver_kind(v);
    else if (k == "solver.step") c.solver.gamma = v == "auto" ? 0.0 : to_double(k, v);
    else if (k == "solver.epoch") c.solver.epoch = v == "auto" ? 0 : to_uint(k, v);
    else if (k == "solver.iters") c.solver.iters = to_uint(k, v);
    else if (k == "solver.minibatch") c.solver.minibatch = to_uint(k, v);
    else if (k == "solver.schedule") c.solver.schedule = parse_step_schedule(v);
    else if (k == "solver.stop") {
      if (v == "fixed") c.solver.stop.kind = StopPolicy::Kind::FixedIters;
      else if (v == "surrogate") c.solver.stop.kind = StopPolicy::Kind::GradSurrogate;
      else throw ConfigError("solver.stop: expected fixed or surrogate, got '" + v + "'");
    }
    else if (k == "solver.last_iterate") c.solver.last_iterate = to_bool(k, v);
    else if (k == "solver.exact_tol") c.solver.exact_tol = to_double(k, v);
    else if (k == "iterations") c.iterations = to_uint(k, v);
    else if (k == "seeds") c.seeds = to_seed_list(k, v);
    else if (k == "output") c.output = v;
    else if (k == "trace.wall_time") c.wall_time = to_bool(k, v);
    else if (k == "trace.blind") c.blind = to_bool(k, v);
    else if (k == "delta.points") c.delta_points = static_cast<int>(to_uint(k, v));
    else if (k == "delta.radius") c.delta_radius = v == "auto" ? -1.0 : to_double(k, v);
    else if (k == "delta.safety") c.delta_safety = to_double(k, v);
  }

  if (c.data_path.empty() == !synth_keys)
    throw ConfigError("exactly one data source is required: set data.path or synth.d");
  if (c.synth && c.loss != LossKind::Quadratic)
    throw ConfigError("the synthetic source generates quadratic problems only");
  if (c.synth) c.synth->M = c.M;
  if (c.M < 2) throw ConfigError("fed.M must be >= 2");
  if (c.plan.B < 1) throw ConfigError("fed.B must be >= 1");
  if (c.iterations < 1) throw ConfigError("iterations must be >= 1");
  if (c.noise.scale < 0) throw ConfigError("noise.scale must be >= 0");
  if (c.lambda && *c.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (c.delta_points < 1) throw ConfigError("delta.points must be >= 1");
  if (c.tuning == Tuning::Manual && !(c.tau > 0 && c.eta > 0 && c.theta))
    throw ConfigError("manual tuning needs tuning.tau, tuning.eta and tuning.theta");
  return c;
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> m;
  auto put = [&](const std::string& k, const std::string& v) { m[k] = v; };
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : "auto"; };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  if (synth) {
    put("synth.d", std::to_string(synth->d));
    put("synth.points_per_node", std::to_string(synth->points_per_node));
    put("synth.hetero", format_double(synth->hetero));
    put("synth.seed", std::to_string(synth->seed));
    put("synth.condition", format_double(synth->condition));
    put("synth.label_noise", format_double(synth->label_noise));
    put("synth.exact_gram", b(synth->exact_gram));
  } else {
    put("data.path", data_path);
    put("fed.N", std::to_string(N));
    put("partition.seed", std::to_string(partition_seed));
  }
  put("loss", to_string(loss));
  put("lambda", opt(lambda));
  put("mu", opt(mu));
  put("delta", opt(delta));
  put("fed.M", std::to_string(M));
  put("fed.B", std::to_string(plan.B));
  put("fed.replacement", b(plan.replacement));
  put("fed.mode", plan.mode == Participation::Full ? "full" : "sampled");
  put("fed.reweight", b(plan.reweight_server_pool));
  put("noise.kind", to_string(noise.kind));
  put("noise.scale", format_double(noise.kind == NoiseKind::None ? 0.0 : noise.scale));
  put("tuning", to_string(tuning));
  put("tuning.theta", opt(theta));
  if (tuning == Tuning::Manual) {
    put("tuning.tau", format_double(tau));
    put("tuning.eta", format_double(eta));
    put("tuning.alpha", format_double(alpha));
  }
  if (tuning == Tuning::Convex)
    put("convex.eta_rule", eta_rule == EtaRule::Proof ? "proof" : "statement");
  put("solver.kind", to_string(solver.kind));
  put("solver.step", solver.gamma > 0 ? format_double(solver.gamma) : "auto");
  put("solver.epoch", solver.epoch > 0 ? std::to_string(solver.epoch) : "auto");
  put("solver.iters", std::to_string(solver.iters));
  put("solver.minibatch", std::to_string(solver.minibatch));
  put("solver.schedule", to_string(solver.schedule));
  put("solver.stop",
      solver.stop.kind == StopPolicy::Kind::GradSurrogate ? "surrogate" : "fixed");
  put("solver.last_iterate", b(solver.last_iterate));
  put("solver.exact_tol", format_double(solver.exact_tol));
  put("iterations", std::to_string(iterations));
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  put("seeds", s);
  put("trace.wall_time", b(wall_time));
  put("trace.blind", b(blind));
  put("delta.points", std::to_string(delta_points));
  put("delta.radius", delta_radius < 0 ? "auto" : format_double(delta_radius));
  put("delta.safety", format_double(delta_safety));

  std::string out;
  for (const auto& [k, v] : m) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace aseg
