#pragma once

#include <string>
#include <vector>

#include "ash/estimate.hpp"
#include "ash/shape.hpp"
#include "ash/types.hpp"

namespace ash {

/// Shortest exact decimal for a double (17 significant digits); CSV output
/// round-trips bit for bit.
std::string format_double(double value);

/// Model file: JSON {m, omega, lambda0: [...], A: [[row, col, value], ...]},
/// triplets sorted by (row, col).
struct Model {
    HawkesNetwork net;
    VectorXd lambda0;
};

void write_model(const std::string& path, const Model& model);
Model read_model(const std::string& path);

/// Events file: CSV `cascade_id,user_id,time[,generation,parent_idx]`,
/// UTF-8, LF. The optional label columns are written by the simulator and
/// absent for real data; the horizon is supplied by the caller.
void write_events(const std::string& path, const EventLog& log, bool labels = true);
EventLog read_events(const std::string& path, double horizon);

/// Per-user vector file: CSV `user_id,value` covering every user once.
void write_vector(const std::string& path, const VectorXd& values,
                  const std::string& value_column);
VectorXd read_vector(const std::string& path, Index m);

/// Support file: CSV `row,col`.
SupportPattern read_support(const std::string& path, Index m);

void write_solve_report(const std::string& path, const SolveReport& report,
                        const std::string& task_name, double gamma);
void write_trace_csv(const std::string& path, const std::vector<double>& trace);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

/// One EventLog per cascade; the held-out pipeline treats each as an
/// independent observation interval.
std::vector<EventLog> split_into_intervals(const EventLog& log);

} // namespace ash
