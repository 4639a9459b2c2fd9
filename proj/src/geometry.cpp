#include "kktrace/geometry.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace kktrace {

void BaseGeometry::validate() const {
  if (circumference <= 0)
    throw Error(ErrorKind::Configuration, "circumference must be positive");
  if (grid < 16) throw Error(ErrorKind::Configuration, "grid too coarse");
  for (int i = 0; i < grid; ++i) {
    double x = double(i) * circumference / grid;
    double n = N(x), hh = h(x), e = eta(x);
    if (n <= 0) throw Error(ErrorKind::Configuration, "lapse N must be positive");
    if (hh <= 0) throw Error(ErrorKind::Configuration, "metric h must be positive");
    if (n * n <= e * e / hh)
      throw Error(ErrorKind::Configuration,
                  "causality bound N^2 > eta^2/h violated at x=" + std::to_string(x));
  }
}

namespace {

TrigPoly trig_from_json(const nlohmann::json& j, double L) {
  if (j.is_number()) return TrigPoly::constant(j.get<double>(), L);
  double c = j.value("const", 0.0);
  std::vector<double> cc = j.value("cos", std::vector<double>{});
  std::vector<double> ss = j.value("sin", std::vector<double>{});
  return TrigPoly(c, cc, ss, L);
}

std::shared_ptr<const GroupData> group_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "U1" || s == "U(1)") return std::make_shared<GroupData>(GroupData::u1());
    if (s == "SU2" || s == "SU(2)") return std::make_shared<GroupData>(GroupData::su2());
    throw Error(ErrorKind::InvalidInput, "unknown builtin group: " + s);
  }
  return std::make_shared<GroupData>(GroupData::from_json_text(j.dump()));
}

}  // namespace

ModelSpec ModelSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("model JSON parse: ") + e.what());
  }
  if (!j.contains("schema_version"))
    throw Error(ErrorKind::InvalidInput, "model file missing schema_version");
  int sv = j["schema_version"].get<int>();
  if (sv != 1)
    throw Error(ErrorKind::InvalidInput,
                "unsupported model schema_version " + std::to_string(sv));

  ModelSpec m;
  m.schema_version = sv;
  m.name = j.value("name", "model");
  double L = j.value("circumference", TWO_PI);
  m.base.circumference = L;
  if (j.contains("N")) m.base.N = trig_from_json(j["N"], L);
  if (j.contains("eta")) m.base.eta = trig_from_json(j["eta"], L);
  if (j.contains("h")) m.base.h = trig_from_json(j["h"], L);
  if (j.contains("V")) m.base.V = trig_from_json(j["V"], L);
  m.base.grid = j.value("grid", 256);

  m.conn.group = group_from_json(j.value("group", nlohmann::json("U1")));
  if (j.contains("A")) m.conn.A = trig_from_json(j["A"], L);

  auto lam = j.value("lambda0", std::vector<double>{1.0});
  m.orbit.lambda0 = Eigen::Map<Eigen::VectorXd>(lam.data(), lam.size());
  m.orbit.m = j.value("level", 1);

  m.base.validate();
  validate_weight(*m.conn.group, m.orbit);
  return m;
}

ModelSpec ModelSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

double ModelSpec::orbit_radius() const {
  const GroupData& g = *conn.group;
  Weight lam = double(orbit.m) * orbit.lambda0;
  return std::sqrt(g.ip(lam, lam));
}

int ModelSpec::charge_dim() const {
  if (abelian()) return conn.group->rank();
  if (conn.group->rank() == 1) return 3;  // SU(2)-like orbit sphere in R^3
  throw Error(ErrorKind::InvalidInput,
              "charge coordinates for rank>=2 non-abelian groups not supported");
}

PhasePoint make_phase_point(const ModelSpec& model, double x, double p,
                            const Eigen::VectorXd& q) {
  if (q.size() != model.charge_dim())
    throw Error(ErrorKind::Domain, "charge coordinate count mismatch");
  double r = model.orbit_radius();
  if (std::fabs(q.norm() - r) > 1e-9 * std::max(1.0, r))
    throw Error(ErrorKind::Domain, "charge not on the coadjoint orbit (|q| != |m lambda0|)");
  PhasePoint pt{wrap_position(x, model.base.circumference), p, q};
  if (hamiltonian_hz(model, pt) <= 0)
    throw Error(ErrorKind::Domain, "phase point is not future-directed (H_Z <= 0)");
  return pt;
}

double hamiltonian_hz(const BaseGeometry& geom, const ConnectionSpec& conn,
                      const PhasePoint& pt) {
  return hamiltonian_hz_t<double>(geom, conn, pt.x, pt.p, pt.q.data(),
                                  int(pt.q.size()));
}

double hamiltonian_hz(const ModelSpec& model, const PhasePoint& pt) {
  return hamiltonian_hz(model.base, model.conn, pt);
}

double null_defect(const BaseGeometry& geom, const ConnectionSpec& conn,
                   double tau, double x, double p, const Eigen::VectorXd& q) {
  double ptilde = p - conn.A(x) * q[q.size() - 1];
  double n = geom.N(x);
  double b = geom.beta(x);
  double u = tau + b * ptilde;
  return -u * u / (n * n) + ptilde * ptilde / geom.h(x) + q.squaredNorm();
}

double null_defect(const ModelSpec& model, double tau, double x, double p,
                   const Eigen::VectorXd& q) {
  return null_defect(model.base, model.conn, tau, x, p, q);
}

HamiltonianGradient gradient_hz(const BaseGeometry& geom,
                                const ConnectionSpec& conn,
                                const PhasePoint& pt) {
  constexpr int kMax = 5;  // x, p, up to 3 charge slots
  int n = 2 + int(pt.q.size());
  if (n > kMax) throw Error(ErrorKind::Domain, "too many charge components");
  using D = Dual<kMax>;
  D x = D::seed(pt.x, 0);
  D p = D::seed(pt.p, 1);
  std::vector<D> q(pt.q.size());
  for (int i = 0; i < pt.q.size(); ++i) q[i] = D::seed(pt.q[i], 2 + i);
  D H = hamiltonian_hz_t<D>(geom, conn, x, p, q.data(), int(q.size()));
  HamiltonianGradient g;
  g.dx = H.d[0];
  g.dp = H.d[1];
  g.dq = Eigen::VectorXd(pt.q.size());
  for (int i = 0; i < pt.q.size(); ++i) g.dq[i] = H.d[2 + i];
  return g;
}

}  // namespace kktrace
