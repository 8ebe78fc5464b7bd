// Solves a three-unit dispatch three ways: the centralised oracle, the continuous
// protocol with saturation rounds, and the discrete iteration.

#include "fxted/fxted.hpp"

#include <cstdio>

int main() {
    using namespace fxted;

    Scenario s;
    s.name = "three-unit";
    s.dispatch.generators = {
        {0.04, 2.0, 0.0, 5.0, 60.0},
        {0.02, 3.0, 0.0, 0.0, 40.0},
        {0.05, 1.5, 0.0, 10.0, 80.0},
    };
    s.dispatch.loads.loads = {45.0, 30.0, 25.0};
    s.dispatch.assignment = Assignment::round_robin(3, 3);
    s.schedule = TopologySchedule::fixed(Topology::path(3));
    s.mode = Mode::constrained;
    s.gains.smoothing_eps = suggested_smoothing(s.dispatch.generators, s.schedule, s.gains);
    s.t_end = settling_bounds(s).total();

    const auto ref = constrained_optimum(s.dispatch.generators, 100.0);
    std::printf("oracle      lambda %.6f  P %.4f %.4f %.4f\n", ref.lambda_star, ref.P_star[0], ref.P_star[1],
                ref.P_star[2]);

    const auto cont = algorithm1(s);
    std::printf("continuous  lambda %.6f  P %.4f %.4f %.4f  (converged at %.3f s, %zu rounds)\n",
                cont.solution.lambda_star, cont.solution.P_star[0], cont.solution.P_star[1], cont.solution.P_star[2],
                cont.trace.convergence_time.value_or(-1.0), cont.rounds.size());

    s.mode = Mode::discrete;
    const auto disc = discrete_solve(s);
    std::printf("discrete    lambda %.6f  P %.4f %.4f %.4f  (%zu iterations)\n", disc.solution.lambda_star,
                disc.solution.P_star[0], disc.solution.P_star[1], disc.solution.P_star[2], disc.iterations);
}
