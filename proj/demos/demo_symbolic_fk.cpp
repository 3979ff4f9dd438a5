// Builds a two-joint planar arm from its transform sequence, prints the
// symbolic forward kinematics and Jacobian, then evaluates the pose at a
// concrete configuration.

#include <cstdio>

#include "armkit/ets.hpp"
#include "armkit/kinematics.hpp"

using namespace armkit;

int main() {
  ets::ETS arm = ets::parse_ets("Rz(q1) tx(L1) Rz(q2) tx(L2)");
  std::printf("elementary transforms: %s\n\n", ets::format_ets(arm).c_str());

  kin::SymPose pose = kin::fk_symbolic(arm);
  std::printf("symbolic forward kinematics:\n");
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c)
      std::printf("  %-42s", pose.at(r, c).str().c_str());
    std::printf("\n");
  }

  kin::SymJacobian jac = kin::jacobian_symbolic(arm);
  std::printf("\nsymbolic Jacobian (world frame):\n");
  for (int r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < jac.cols; ++c)
      std::printf("  %-42s", jac.at(r, c).str().c_str());
    std::printf("\n");
  }

  std::map<std::string, double> lengths{{"L1", 1.0}, {"L2", 0.8}};
  Mat4 at = kin::fk_numeric(arm, {0.3, 0.5}, lengths);
  std::printf("\npose at q = [0.3, 0.5] with L1=1, L2=0.8:\n");
  for (int r = 0; r < 4; ++r)
    std::printf("  [% .6f % .6f % .6f % .6f]\n", at(r, 0), at(r, 1), at(r, 2), at(r, 3));
  return 0;
}
