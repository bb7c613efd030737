#include "drs/jacobian_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace drs {

namespace {

template <typename Derived>
void put_row_major(std::ostringstream& os, const char* key, const Eigen::MatrixBase<Derived>& m) {
  os << key;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << format_double(m(i, j));
  os << '\n';
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::vector<std::string> expect(const std::string& key, std::size_t values) {
    std::string line;
    do {
      if (!std::getline(in_, line)) throw ConfigError("estimator: unexpected end, wanted '" + key + "'");
      ++line_no_;
    } while (line.empty());
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key)
      throw ConfigError("estimator line " + std::to_string(line_no_) + ": expected '" + key +
                        "', found '" + k + "'");
    std::vector<std::string> out;
    std::string tok;
    while (ls >> tok) out.push_back(tok);
    if (out.size() != values)
      throw ConfigError("estimator line " + std::to_string(line_no_) + ": '" + key + "' needs " +
                        std::to_string(values) + " values");
    return out;
  }

 private:
  std::istringstream in_;
  int line_no_ = 0;
};

template <typename Mat>
Mat read_row_major(LineReader& r, const std::string& key) {
  Mat m;
  const auto v = r.expect(key, static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = parse_double(v[static_cast<std::size_t>(i * m.cols() + j)]);
  return m;
}

}  // namespace

std::string serialize_estimator(const JacobianEstimator& est) {
  std::ostringstream os;
  os << "drs-jacobian-estimator " << kEstimatorFormatVersion << '\n';
  os << "seed " << est.seed << '\n';
  os << "dataset_fingerprint " << (est.dataset_fingerprint.empty() ? "-" : est.dataset_fingerprint) << '\n';
  os << "K " << est.gmm.K() << '\n';
  os << "tau " << format_double(est.tau) << '\n';
  for (int k = 0; k < est.gmm.K(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    os << "component " << k << '\n';
    os << "weight " << format_double(est.gmm.weights[kk]) << '\n';
    put_row_major(os, "mean", est.gmm.means[kk].transpose());
    put_row_major(os, "covariance", est.gmm.covariances[kk]);
    put_row_major(os, "map", est.maps[kk].X);
    os << "residual_rms " << format_double(est.maps[kk].residual_rms) << '\n';
    os << "count " << est.maps[kk].count << '\n';
  }
  os << "end\n";
  return os.str();
}

JacobianEstimator parse_estimator(const std::string& text) {
  LineReader r(text);
  JacobianEstimator est;
  const auto ver = r.expect("drs-jacobian-estimator", 1);
  if (ver[0] != std::to_string(kEstimatorFormatVersion))
    throw ConfigError("estimator: unsupported version " + ver[0]);
  est.seed = std::stoull(r.expect("seed", 1)[0]);
  est.dataset_fingerprint = r.expect("dataset_fingerprint", 1)[0];
  if (est.dataset_fingerprint == "-") est.dataset_fingerprint.clear();
  const int K = std::stoi(r.expect("K", 1)[0]);
  if (K < 1) throw ConfigError("estimator: K must be >= 1");
  est.tau = parse_double(r.expect("tau", 1)[0]);
  for (int k = 0; k < K; ++k) {
    if (std::stoi(r.expect("component", 1)[0]) != k) throw ConfigError("estimator: components out of order");
    est.gmm.weights.push_back(parse_double(r.expect("weight", 1)[0]));
    est.gmm.means.push_back(read_row_major<Eigen::Matrix<double, 1, 4>>(r, "mean").transpose());
    est.gmm.covariances.push_back(read_row_major<Mat4>(r, "covariance"));
    LocalLinearMap m;
    m.X = read_row_major<Mat34>(r, "map");
    m.residual_rms = parse_double(r.expect("residual_rms", 1)[0]);
    m.count = std::stoi(r.expect("count", 1)[0]);
    est.maps.push_back(m);
  }
  r.expect("end", 0);
  return est;
}

void save_estimator(const JacobianEstimator& est, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write estimator file " + path.string());
  out << serialize_estimator(est);
}

JacobianEstimator load_estimator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read estimator file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_estimator(ss.str());
}

}  // namespace drs
