#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "kktrace/util.hpp"

namespace kktrace {

using Weight = Eigen::VectorXd;

/// Root datum of a compact group. Weights and roots are coordinate vectors in
/// a fixed orthonormal basis of the weight space; the Ad-invariant inner
/// product on the algebra is scaled by inner_norm, so the induced inner
/// product on weights is <u,v> = dot(u,v) / inner_norm.
///
/// Supported shapes: rank-r torus (no roots) or semisimple data where the
/// simple roots span the full rank. Pairings with torus angles use
/// fundamental-weight coordinates (coroot pairings) for semisimple groups and
/// plain coordinates for torus factors, so integral weights give single-valued
/// characters either way.
class GroupData {
public:
  GroupData(std::string name, int rank, std::vector<Weight> positive_roots,
            double inner_norm);

  static GroupData u1();
  static GroupData su2();
  /// Parse the root-data schema documented in README (JSON text).
  static GroupData from_json_text(const std::string& text);

  const std::string& name() const { return name_; }
  int rank() const { return rank_; }
  int dim() const { return dim_; }
  double inner_norm() const { return inner_norm_; }
  const std::vector<Weight>& positive_roots() const { return roots_; }
  const std::vector<Weight>& simple_roots() const { return simple_; }
  bool is_torus() const { return roots_.empty(); }

  /// <u,v> in the weight-space inner product.
  double ip(const Weight& u, const Weight& v) const {
    return u.dot(v) / inner_norm_;
  }

  /// Coroot pairing 2<u,a>/<a,a>; integer on integral weights.
  double coroot_pairing(const Weight& u, const Weight& root) const {
    return 2.0 * u.dot(root) / root.dot(root);
  }

  /// Coordinates of a weight against the torus-angle basis (fundamental-weight
  /// coordinates when roots exist, plain coordinates for a torus).
  Eigen::VectorXd angle_coordinates(const Weight& w) const;

  /// Half sum of positive roots (zero for a torus).
  const Weight& rho_half() const { return rho_half_; }
  /// Sum of positive roots, the paper's rho convention.
  const Weight& rho_sum() const { return rho_sum_; }

  /// Weyl group as matrices acting on weight coordinates, with signs det(w).
  const std::vector<Eigen::MatrixXd>& weyl_elements() const { return weyl_; }
  const std::vector<double>& weyl_signs() const { return weyl_signs_; }

private:
  void validate_and_finish();

  std::string name_;
  int rank_ = 0;
  int dim_ = 0;
  std::vector<Weight> roots_;
  std::vector<Weight> simple_;
  double inner_norm_ = 1.0;
  Weight rho_half_, rho_sum_;
  Eigen::MatrixXd fw_basis_;  // columns: fundamental weights
  std::vector<Eigen::MatrixXd> weyl_;
  std::vector<double> weyl_signs_;
};

/// Dominant integral highest weight Lambda_0 together with the scaling level m
/// (the representation attached to the orbit m*O).
struct OrbitWeight {
  Weight lambda0;
  int m = 1;
};

/// Validity check used as precondition by every operation below; throws
/// Error(InvalidInput) for non-dominant or non-integral weights.
void validate_weight(const GroupData& g, const OrbitWeight& w);

long weyl_dimension(const GroupData& g, const OrbitWeight& w);

double casimir_eigenvalue(const GroupData& g, const OrbitWeight& w);

int orbit_half_dimension(const GroupData& g, const OrbitWeight& w);

complexd character(const GroupData& g, const OrbitWeight& w,
                   const Eigen::VectorXd& torus_angles);

complexd stabilizer_character(const GroupData& g, const OrbitWeight& w,
                              const Eigen::VectorXd& stab_angles);

/// Weight system of the level-m representation by Freudenthal recursion:
/// map from integer angle-coordinates of each weight to its multiplicity.
/// This is the brute-force route the closed-form operations are tested
/// against; it is also what non-abelian spectra use to enumerate fiber modes.
struct WeightSystem {
  // each entry: (angle-coordinates of the weight, multiplicity, weight vector)
  struct Entry {
    Eigen::VectorXi angle_coords;
    long multiplicity;
    Weight vec;
  };
  std::vector<Entry> entries;
  long total_dim() const;
};

WeightSystem weight_system(const GroupData& g, const OrbitWeight& w);

}  // namespace kktrace
