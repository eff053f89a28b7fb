// Dispersive readout of a dressed qubit: the oscillator noise peak moves by +-g^2/Delta_R
// with the qubit state.  Prints the peak positions in frequency bins.

#include <qubus/spectral.hpp>

#include <cstdio>

int main() {
    using namespace qubus;
    const SystemParams p = presets::readout_dressed();
    const QubitInit inits[] = {QubitInit::ground, QubitInit::excited};
    const auto results = readout_experiments(p, inits, ModelKind::dressed);
    std::printf("predicted shift g^2/Delta_R = %.3e, bin = %.3e\n", dispersive_shift(p), results[0].bin);
    for (const auto& r : results)
        std::printf("%-8s peak %.7f  shift %+.2f bins (predicted %+.2f)\n", to_string(r.init).c_str(), r.peak.omega,
                    (r.peak.omega - p.omega_h) / r.bin, r.predicted_shift / r.bin);
}
