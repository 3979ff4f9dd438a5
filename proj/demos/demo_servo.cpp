// Drives a Panda arm from its ready pose to a nearby Cartesian goal with
// resolved-rate control and exports the trajectory as CSV and SVG.

#include <cstdio>

#include "armkit/ets.hpp"
#include "armkit/kinematics.hpp"
#include "armkit/motion.hpp"

using namespace armkit;

int main() {
  ets::RobotModel panda = ets::builtin_model("panda");
  std::vector<double> start = panda.configurations.at("qr");

  std::vector<double> goal_q = start;
  goal_q[0] += 0.4;
  goal_q[3] += 0.2;
  Mat4 goal = kin::fk_numeric(panda.ets, goal_q, panda.constants);

  motion::ServoOptions opts;
  opts.gain = {2.0};
  motion::Trajectory traj = motion::simulate_servo(panda, start, goal, opts);

  std::printf("servo run: %zu steps, arrived=%s, final error %.3e\n",
              traj.records.size(), traj.arrived ? "yes" : "no",
              traj.records.back().error_norm);
  motion::export_trajectory(traj, "csv", "demo_servo.csv");
  motion::export_trajectory(traj, "svg", "demo_servo.svg");
  std::printf("wrote demo_servo.csv and demo_servo.svg\n");
  return 0;
}
