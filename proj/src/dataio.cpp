#include "aseg/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "aseg/kernels.hpp"
#include "aseg/rng.hpp"

namespace aseg {

namespace {

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size() && std::isfinite(out);
}

bool parse_index(std::string_view tok, long long& out) {
  if (tok.empty()) return false;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size();
}

struct RawRow {
  double label;
  std::vector<std::int32_t> idx;
  std::vector<double> val;
};

}  // namespace

ParsedLibsvm parse_libsvm(std::istream& in, std::size_t min_dim) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t max_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;

    RawRow row;
    if (!parse_double(tok, row.label)) throw ParseError(lineno, "non-numeric label '" + tok + "'");
    long long prev = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "malformed token '" + tok + "'");
      long long index = 0;
      double value = 0.0;
      if (!parse_index(std::string_view(tok).substr(0, colon), index))
        throw ParseError(lineno, "bad feature index in '" + tok + "'");
      if (index <= 0) throw ParseError(lineno, "feature index must be >= 1");
      if (index > std::numeric_limits<std::int32_t>::max())
        throw ParseError(lineno, "feature index too large");
      if (index <= prev) throw ParseError(lineno, "feature indices not strictly increasing");
      if (!parse_double(std::string_view(tok).substr(colon + 1), value))
        throw ParseError(lineno, "bad feature value in '" + tok + "'");
      prev = index;
      row.idx.push_back(static_cast<std::int32_t>(index - 1));
      row.val.push_back(value);
      max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(index));
    }
    rows.push_back(std::move(row));
  }

  ParsedLibsvm out;
  out.d_inferred = max_index;
  out.data.dim = std::max(max_index, min_dim);
  for (const auto& r : rows) out.data.add_row(r.label, r.idx, r.val);
  return out;
}

ParsedLibsvm read_libsvm_file(const std::string& path, std::size_t min_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return parse_libsvm(in, min_dim);
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  auto put = [&](double v) {
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.write(buf, p - buf);
  };
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    put(ds.labels[i]);
    const auto rw = ds.row(i);
    for (std::size_t k = 0; k < rw.idx.size(); ++k) {
      out << ' ' << (rw.idx[k] + 1) << ':';
      put(rw.val[k]);
    }
    out << '\n';
  }
}

Dataset load_dataset(const std::string& path, LossKind loss, std::size_t min_dim) {
  auto parsed = read_libsvm_file(path, min_dim);
  if (loss == LossKind::Logistic) parsed.data.normalize_binary_labels();
  parsed.data.validate();
  return std::move(parsed.data);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(splitmix64(seed));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Partition build_partition(const Dataset& ds, LossModel model, std::size_t M, std::size_t N,
                          std::uint64_t seed) {
  if (M < 2) throw ConfigError("partition: need M >= 2");
  if (N < 1 || N >= M) throw ConfigError("partition: need 1 <= N < M");
  const std::size_t K = M + N;
  if (ds.rows() < K)
    throw ConfigError("partition: " + std::to_string(ds.rows()) + " rows cannot fill " +
                      std::to_string(K) + " batches");

  Partition p;
  p.shuffle_seed = seed;
  const auto perm = seeded_permutation(ds.rows(), seed);
  const std::size_t base = ds.rows() / K, extra = ds.rows() % K;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < K; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    p.batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                           perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }

  auto shard_of = [&](std::size_t b) {
    return std::make_shared<const Dataset>(ds.subset(p.batches[b]));
  };

  std::vector<Shard> server_shards;
  for (std::size_t b = 0; b < N; ++b) {
    p.server_batches.push_back(b);
    server_shards.push_back({shard_of(b), 1.0});
  }
  p.nodes.emplace_back(model, std::move(server_shards));
  for (std::size_t m = 1; m < M; ++m) {
    const std::size_t b = N + m - 1;
    p.client_batches.push_back(b);
    p.nodes.emplace_back(model, shard_of(b));
  }
  for (std::size_t b = N + M - 1; b < K; ++b) p.dropped_batches.push_back(b);
  p.global = std::make_shared<const Objective>(Objective::average(p.nodes));
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic quadratics

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

// Symmetric square root with negative eigenvalues clipped to zero.
Eigen::MatrixXd psd_root(const Eigen::MatrixXd& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::shared_ptr<Dataset> dense_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& labels) {
  auto ds = std::make_shared<Dataset>();
  ds->dim = static_cast<std::size_t>(rows.cols());
  std::vector<std::int32_t> idx(ds->dim);
  std::vector<double> val(ds->dim);
  for (std::size_t k = 0; k < ds->dim; ++k) idx[k] = static_cast<std::int32_t>(k);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (std::size_t k = 0; k < ds->dim; ++k) val[k] = rows(i, static_cast<Eigen::Index>(k));
    ds->add_row(labels(i), idx, val);
  }
  return ds;
}

}  // namespace

Objective quadratic_from_gram(const Eigen::MatrixXd& gram, ConstVecView x_target, double lambda) {
  const auto d = gram.rows();
  check_dim(x_target.size(), static_cast<std::size_t>(d), "quadratic_from_gram");
  // rows a_i = sqrt(d) * R e_i with R R^T = gram, so (1/d) sum a_i a_i^T = gram.
  const Eigen::MatrixXd rows = std::sqrt(static_cast<double>(d)) * psd_root(gram).transpose();
  const Eigen::Map<const Eigen::VectorXd> xt(x_target.data(), d);
  const Eigen::VectorXd labels = rows * xt;
  return Objective(LossModel{LossKind::Quadratic, lambda}, dense_rows(rows, labels));
}

SyntheticProblem gen_synthetic_quadratic(const SynthSpec& spec) {
  if (spec.d < 1) throw ConfigError("synthetic: d must be >= 1");
  if (spec.M < 1) throw ConfigError("synthetic: M must be >= 1");
  if (!spec.exact_gram && spec.points_per_node < 1)
    throw ConfigError("synthetic: points_per_node must be >= 1");
  if (spec.hetero < 0) throw ConfigError("synthetic: hetero must be >= 0");

  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(splitmix64(spec.seed ^ 0xA5E6ULL));
  std::normal_distribution<double> nd(0.0, 1.0);

  // Shared covariance Q diag(log-spaced in [1, condition]) Q^T.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(d, d, rng));
  const Eigen::MatrixXd Q = qr.householderQ();
  Eigen::VectorXd eig(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double t = d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
    eig(i) = std::pow(spec.condition, t);
  }
  const Eigen::MatrixXd C0 = Q * eig.asDiagonal() * Q.transpose();

  Eigen::VectorXd x_target(d);
  for (Eigen::Index i = 0; i < d; ++i) x_target(i) = nd(rng);

  SyntheticProblem out;
  out.x_target.assign(x_target.data(), x_target.data() + d);
  const LossModel model{LossKind::Quadratic, spec.lambda};

  for (std::size_t m = 0; m < spec.M; ++m) {
    Eigen::MatrixXd E = gaussian_matrix(d, d, rng);
    E = 0.5 * (E + E.transpose());
    const double en = dense_spectral_norm(E);
    if (en > 0) E /= en;
    const Eigen::MatrixXd Cm = C0 + spec.hetero * E;
    const Eigen::MatrixXd R = psd_root(Cm);

    Eigen::VectorXd xm = x_target;
    for (Eigen::Index i = 0; i < d; ++i) xm(i) += spec.hetero * nd(rng);

    Eigen::MatrixXd rows;
    if (spec.exact_gram) {
      rows = std::sqrt(static_cast<double>(d)) * R.transpose();
    } else {
      const auto n = static_cast<Eigen::Index>(spec.points_per_node);
      rows = gaussian_matrix(n, d, rng) * R;  // row covariance R^T R = Cm
    }
    Eigen::VectorXd labels = rows * xm;
    for (Eigen::Index i = 0; i < labels.size(); ++i) labels(i) += spec.label_noise * nd(rng);
    out.nodes.emplace_back(model, dense_rows(rows, labels));
  }
  out.global = std::make_shared<const Objective>(Objective::average(out.nodes));

  const Vec origin(spec.d, 0.0);
  const Eigen::MatrixXd Hg = dense_hessian(*out.global, origin);
  out.delta_exact = dense_spectral_norm(dense_hessian(out.nodes.front(), origin) - Hg);
  for (const auto& node : out.nodes)
    out.delta_all_nodes =
        std::max(out.delta_all_nodes, dense_spectral_norm(dense_hessian(node, origin) - Hg));
  return out;
}

}  // namespace aseg
