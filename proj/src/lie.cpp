#include "kktrace/lie.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>

namespace kktrace {

namespace {

constexpr double kTol = 1e-9;

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() < 1e-8;
}

}  // namespace

GroupData::GroupData(std::string name, int rank,
                     std::vector<Weight> positive_roots, double inner_norm)
    : name_(std::move(name)),
      rank_(rank),
      roots_(std::move(positive_roots)),
      inner_norm_(inner_norm) {
  validate_and_finish();
}

void GroupData::validate_and_finish() {
  if (rank_ <= 0) throw Error(ErrorKind::InvalidInput, "rank must be positive");
  if (inner_norm_ <= 0)
    throw Error(ErrorKind::InvalidInput, "inner_norm must be positive");
  for (const auto& r : roots_) {
    if (r.size() != rank_)
      throw Error(ErrorKind::InvalidInput, "root coordinate size != rank");
    if (r.norm() < kTol)
      throw Error(ErrorKind::InvalidInput, "positive root must be nonzero");
  }
  dim_ = rank_ + 2 * static_cast<int>(roots_.size());

  rho_sum_ = Weight::Zero(rank_);
  for (const auto& r : roots_) rho_sum_ += r;
  rho_half_ = 0.5 * rho_sum_;

  if (roots_.empty()) {
    fw_basis_ = Eigen::MatrixXd::Identity(rank_, rank_);
    weyl_ = {Eigen::MatrixXd::Identity(rank_, rank_)};
    weyl_signs_ = {1.0};
    return;
  }

  // Simple roots: positive roots that are not sums of two positive roots.
  for (const auto& a : roots_) {
    bool decomposable = false;
    for (const auto& b : roots_) {
      for (const auto& c : roots_) {
        if ((b + c - a).norm() < kTol) {
          decomposable = true;
          break;
        }
      }
      if (decomposable) break;
    }
    if (!decomposable) simple_.push_back(a);
  }
  if (static_cast<int>(simple_.size()) != rank_)
    throw Error(ErrorKind::InvalidInput,
                "simple roots must span the rank (torus factors mixed with "
                "roots are not supported)");

  // Fundamental weights: <omega_a, alpha_b^vee> = delta_ab.
  Eigen::MatrixXd coroots(rank_, rank_);
  for (int b = 0; b < rank_; ++b)
    coroots.row(b) = 2.0 * simple_[b].transpose() / simple_[b].dot(simple_[b]);
  fw_basis_ = coroots.fullPivLu().solve(Eigen::MatrixXd::Identity(rank_, rank_));

  // Weyl group closure from simple reflections.
  std::vector<Eigen::MatrixXd> gens;
  for (const auto& a : simple_) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(rank_, rank_) -
                        2.0 * (a * a.transpose()) / a.dot(a);
    gens.push_back(s);
  }
  weyl_ = {Eigen::MatrixXd::Identity(rank_, rank_)};
  weyl_signs_ = {1.0};
  std::deque<std::size_t> frontier = {0};
  while (!frontier.empty()) {
    std::size_t idx = frontier.front();
    frontier.pop_front();
    for (const auto& s : gens) {
      Eigen::MatrixXd cand = s * weyl_[idx];
      bool known = false;
      for (const auto& w : weyl_)
        if (same_matrix(w, cand)) {
          known = true;
          break;
        }
      if (!known) {
        weyl_.push_back(cand);
        weyl_signs_.push_back(-weyl_signs_[idx]);
        frontier.push_back(weyl_.size() - 1);
        if (weyl_.size() > 40320)
          throw Error(ErrorKind::InvalidInput, "Weyl group too large");
      }
    }
  }
}

GroupData GroupData::u1() { return GroupData("U(1)", 1, {}, 1.0); }

GroupData GroupData::su2() {
  Weight alpha(1);
  alpha << std::sqrt(2.0);  // <alpha,alpha> = 2
  return GroupData("SU(2)", 1, {alpha}, 1.0);
}

GroupData GroupData::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  std::string name = j.value("name", "custom");
  int rank = j.at("rank").get<int>();
  double inner_norm = j.value("inner_norm", 1.0);
  std::vector<Weight> roots;
  for (const auto& row : j.value("positive_roots", nlohmann::json::array())) {
    Weight r(rank);
    if (static_cast<int>(row.size()) != rank)
      throw Error(ErrorKind::InvalidInput, "root coordinate size != rank");
    for (int i = 0; i < rank; ++i) r[i] = row[i].get<double>();
    roots.push_back(r);
  }
  return GroupData(name, rank, roots, inner_norm);
}

Eigen::VectorXd GroupData::angle_coordinates(const Weight& w) const {
  if (is_torus()) return w;
  Eigen::VectorXd c(rank_);
  for (int a = 0; a < rank_; ++a) c[a] = coroot_pairing(w, simple_[a]);
  return c;
}

void validate_weight(const GroupData& g, const OrbitWeight& w) {
  if (w.lambda0.size() != g.rank())
    throw Error(ErrorKind::InvalidInput, "weight coordinate size != rank");
  if (w.m < 0) throw Error(ErrorKind::InvalidInput, "level m must be >= 0");
  for (const auto& a : g.positive_roots()) {
    if (w.lambda0.dot(a) < -kTol)
      throw Error(ErrorKind::InvalidInput, "weight is not dominant");
    double p = g.coroot_pairing(w.lambda0, a);
    if (std::fabs(p - std::round(p)) > 1e-7)
      throw Error(ErrorKind::InvalidInput, "weight is not integral");
  }
  if (g.is_torus()) {
    for (int i = 0; i < g.rank(); ++i)
      if (std::fabs(w.lambda0[i] - std::round(w.lambda0[i])) > 1e-7)
        throw Error(ErrorKind::InvalidInput,
                    "torus weight coordinates must be integers");
  }
}

long weyl_dimension(const GroupData& g, const OrbitWeight& w) {
  validate_weight(g, w);
  Weight lam = double(w.m) * w.lambda0;
  double num = 1.0, den = 1.0;
  for (const auto& a : g.positive_roots()) {
    num *= g.ip(a, lam + g.rho_half());
    den *= g.ip(a, g.rho_half());
  }
  double d = num / den;
  long rounded = std::lround(d);
  if (std::fabs(d - double(rounded)) > 1e-6 * std::max(1.0, std::fabs(d)))
    throw Error(ErrorKind::Numerical, "Weyl dimension did not round to integer");
  return rounded;
}

double casimir_eigenvalue(const GroupData& g, const OrbitWeight& w) {
  validate_weight(g, w);
  Weight lam = double(w.m) * w.lambda0;
  return g.ip(lam, lam + g.rho_sum());
}

int orbit_half_dimension(const GroupData& g, const OrbitWeight& w) {
  validate_weight(g, w);
  int count = 0;
  for (const auto& a : g.positive_roots())
    if (std::fabs(g.ip(a, w.lambda0)) > kTol) ++count;
  return count;
}

WeightSystem weight_system(const GroupData& g, const OrbitWeight& w) {
  validate_weight(g, w);
  Weight lam = double(w.m) * w.lambda0;
  WeightSystem out;

  if (g.is_torus()) {
    WeightSystem::Entry e;
    e.vec = lam;
    e.multiplicity = 1;
    Eigen::VectorXd c = g.angle_coordinates(lam);
    e.angle_coords = c.array().round().cast<int>();
    out.entries.push_back(e);
    return out;
  }

  const auto& simple = g.simple_roots();
  int r = g.rank();

  // Work in integer fundamental-weight coordinates, keyed by vector.
  auto key_of = [&](const Eigen::VectorXd& fw) {
    std::vector<int> key(r);
    for (int i = 0; i < r; ++i) {
      double v = fw[i];
      if (std::fabs(v - std::round(v)) > 1e-6)
        throw Error(ErrorKind::Numerical, "non-integer weight coordinate");
      key[i] = static_cast<int>(std::lround(v));
    }
    return key;
  };
  std::map<std::vector<int>, long> mult;
  std::map<std::vector<int>, Weight> vecs;
  std::vector<std::vector<std::vector<int>>> levels;  // keys per level

  std::vector<int> top = key_of(g.angle_coordinates(lam));
  mult[top] = 1;
  vecs[top] = lam;
  levels.push_back({top});

  const Weight rho = g.rho_half();
  const double top_norm = g.ip(lam + rho, lam + rho);

  for (int level = 1;; ++level) {
    std::vector<std::vector<int>> current;
    // candidates: previous-level weights minus each simple root
    for (const auto& prev_key : levels[level - 1]) {
      const Weight& prev = vecs[prev_key];
      for (const auto& a : simple) {
        Weight cand = prev - a;
        std::vector<int> ck = key_of(g.angle_coordinates(cand));
        if (mult.count(ck)) continue;
        // Freudenthal:
        // mult(mu) * (|lam+rho|^2 - |mu+rho|^2)
        //   = 2 sum_{alpha>0} sum_{k>=1} mult(mu+k alpha) <mu+k alpha, alpha>
        double denom = top_norm - g.ip(cand + rho, cand + rho);
        if (denom <= kTol) {
          mult[ck] = 0;
          continue;
        }
        double acc = 0.0;
        for (const auto& alpha : g.positive_roots()) {
          // Along the alpha-string the set of weights is contiguous and each
          // step up lowers the BFS level by at least 1, so k <= level and we
          // may stop at the first gap after a hit.
          bool seen = false;
          for (int k = 1; k <= level; ++k) {
            Weight up = cand + double(k) * alpha;
            auto it = mult.find(key_of(g.angle_coordinates(up)));
            long mu_up = (it == mult.end()) ? 0 : it->second;
            if (mu_up > 0) {
              seen = true;
              acc += 2.0 * double(mu_up) * g.ip(up, alpha);
            } else if (seen) {
              break;
            }
          }
        }
        long m_cand = std::lround(acc / denom);
        if (std::fabs(acc / denom - double(m_cand)) > 1e-6)
          throw Error(ErrorKind::Numerical, "Freudenthal multiplicity not integral");
        mult[ck] = m_cand;
        if (m_cand > 0) {
          vecs[ck] = cand;
          current.push_back(ck);
        }
      }
    }
    if (current.empty()) break;
    levels.push_back(current);
    if (level > 200 * (w.m + 1))
      throw Error(ErrorKind::Numerical, "weight system did not terminate");
  }

  for (const auto& [key, m] : mult) {
    if (m <= 0) continue;
    WeightSystem::Entry e;
    e.multiplicity = m;
    e.vec = vecs[key];
    e.angle_coords = Eigen::VectorXi(g.rank());
    for (int i = 0; i < g.rank(); ++i) e.angle_coords[i] = key[i];
    out.entries.push_back(e);
  }
  return out;
}

long WeightSystem::total_dim() const {
  long t = 0;
  for (const auto& e : entries) t += e.multiplicity;
  return t;
}

namespace {

complexd phase_exp(double a) { return complexd(std::cos(a), std::sin(a)); }

complexd character_weight_sum(const GroupData& g, const OrbitWeight& w,
                              const Eigen::VectorXd& angles) {
  WeightSystem ws = weight_system(g, w);
  complexd acc(0, 0);
  for (const auto& e : ws.entries) {
    double arg = 0;
    for (int i = 0; i < g.rank(); ++i) arg += double(e.angle_coords[i]) * angles[i];
    acc += double(e.multiplicity) * phase_exp(arg);
  }
  return acc;
}

}  // namespace

complexd character(const GroupData& g, const OrbitWeight& w,
                   const Eigen::VectorXd& torus_angles) {
  validate_weight(g, w);
  if (torus_angles.size() != g.rank())
    throw Error(ErrorKind::Domain, "torus angle count != rank");
  if (g.is_torus() || g.rank() == 1)
    return character_weight_sum(g, w, torus_angles);

  // Weyl alternating sum in angle coordinates; fall back to the summed
  // weight form when the denominator degenerates.
  Weight lam = double(w.m) * w.lambda0;
  const Weight rho = g.rho_half();
  complexd num(0, 0), den(0, 0);
  for (std::size_t i = 0; i < g.weyl_elements().size(); ++i) {
    const Eigen::MatrixXd& W = g.weyl_elements()[i];
    double sgn = g.weyl_signs()[i];
    Eigen::VectorXd cn = g.angle_coordinates(W * (lam + rho));
    Eigen::VectorXd cd = g.angle_coordinates(W * rho);
    num += sgn * phase_exp(cn.dot(torus_angles));
    den += sgn * phase_exp(cd.dot(torus_angles));
  }
  if (std::abs(den) < 1e-10) return character_weight_sum(g, w, torus_angles);
  return num / den;
}

complexd stabilizer_character(const GroupData& g, const OrbitWeight& w,
                              const Eigen::VectorXd& stab_angles) {
  validate_weight(g, w);
  if (stab_angles.size() != g.rank())
    throw Error(ErrorKind::Domain, "stabilizer element angle count != rank");
  Eigen::VectorXd c = g.angle_coordinates(w.lambda0);
  return phase_exp(c.dot(stab_angles));
}

}  // namespace kktrace
