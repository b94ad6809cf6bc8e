#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "delay_spectra/asymptotics.hpp"
#include "delay_spectra/certifiers.hpp"
#include "delay_spectra/simulator.hpp"
#include "delay_spectra/spectrum.hpp"
#include "delay_spectra/system.hpp"
#include "delay_spectra/trajectory.hpp"

namespace delay_spectra {

using Json = nlohmann::ordered_json;

/// Contents of a system-spec file: the system, its initial history and an
/// optional perturbation block.
struct LoadedSpec {
    DelaySystem system;
    HistoryFunction history;
    std::optional<PerturbationSpec> perturbation;
};

LoadedSpec parse_spec(const Json& j);
LoadedSpec load_spec_file(const std::string& path);

Json system_to_json(const DelaySystem& sys);
Json history_to_json(const HistoryFunction& hist);
Json perturbation_to_json(const PerturbationSpec& pert);
Json spec_to_json(const LoadedSpec& spec);

Json rootset_to_json(const RootSet& rs);
Json certificate_to_json(const Certificate& cert);
Json hypothesis_report_to_json(const HypothesisReport& rep);
Json exponent_fit_to_json(const ExponentFit& fit);
Json comparison_report_to_json(const ComparisonReport& rep);

/// Serializes with every floating-point number printed at 17 significant
/// digits so identical inputs produce byte-identical artifacts.
std::string dump_json_17(const Json& j, int indent = 2);
void write_json_file(const std::string& path, const Json& j);

/// CSV with header t,x1,...,xn; one row per grid point, 17 significant digits.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

/// CSV of (t, log ||x_t||, log ||x_t - y_t||) for external plotting.
void write_compare_csv(const std::string& path, const Trajectory& x,
                       const std::function<VectorXd(double)>& y, double h, Norm norm);

}  // namespace delay_spectra
