#include "ash/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ash {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what, long line = -1) {
    std::string msg = path + ": " + what;
    if (line >= 0) {
        msg += " (line " + std::to_string(line) + ")";
    }
    throw std::runtime_error(msg);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(path, "cannot open for reading");
    }
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
    if (!out) {
        fail(path, "cannot open for writing");
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_double(const std::string& text, const std::string& path, long line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            fail(path, "trailing characters in number '" + text + "'", line);
        }
        return v;
    } catch (const std::invalid_argument&) {
        fail(path, "expected a number, got '" + text + "'", line);
    } catch (const std::out_of_range&) {
        fail(path, "number out of range: '" + text + "'", line);
    }
}

long parse_long(const std::string& text, const std::string& path, long line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size()) {
            fail(path, "trailing characters in integer '" + text + "'", line);
        }
        return v;
    } catch (const std::invalid_argument&) {
        fail(path, "expected an integer, got '" + text + "'", line);
    } catch (const std::out_of_range&) {
        fail(path, "integer out of range: '" + text + "'", line);
    }
}

} // namespace

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

void write_model(const std::string& path, const Model& model) {
    json a = json::array();
    for (const Triplet& e : model.net.A.entries()) {
        a.push_back({e.row, e.col, e.value});
    }
    json j{{"m", model.net.m},
           {"omega", model.net.omega},
           {"lambda0", std::vector<double>(model.lambda0.begin(), model.lambda0.end())},
           {"A", std::move(a)}};
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

Model read_model(const std::string& path) {
    auto in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(path, std::string("invalid JSON: ") + e.what());
    }
    try {
        const Index m = j.at("m").get<Index>();
        const double omega = j.at("omega").get<double>();
        const std::vector<double> lambda0 = j.at("lambda0").get<std::vector<double>>();
        std::vector<Triplet> entries;
        for (const json& row : j.at("A")) {
            if (!row.is_array() || row.size() != 3) {
                fail(path, "A entries must be [row, col, value] triplets");
            }
            entries.push_back({row[0].get<Index>(), row[1].get<Index>(), row[2].get<double>()});
        }
        if (static_cast<Index>(lambda0.size()) != m) {
            fail(path, "lambda0 length does not match m");
        }
        Model model;
        try {
            model.net = make_network(m, std::move(entries), omega);
        } catch (const std::invalid_argument& e) {
            fail(path, e.what());
        }
        model.lambda0 = Eigen::Map<const VectorXd>(lambda0.data(), static_cast<Index>(lambda0.size()));
        for (Index i = 0; i < model.lambda0.size(); ++i) {
            if (!(model.lambda0[i] >= 0.0)) {
                fail(path, "lambda0 must be nonnegative");
            }
        }
        return model;
    } catch (const json::exception& e) {
        fail(path, std::string("missing or malformed field: ") + e.what());
    }
}

void write_events(const std::string& path, const EventLog& log, bool labels) {
    auto out = open_out(path);
    out << (labels ? "cascade_id,user_id,time,generation,parent_idx\n"
                   : "cascade_id,user_id,time\n");
    for (std::size_t c = 0; c < log.cascades.size(); ++c) {
        for (const Event& e : log.cascades[c].events) {
            out << c << ',' << e.user << ',' << format_double(e.time);
            if (labels) {
                out << ',';
                if (e.generation >= 0) {
                    out << e.generation;
                }
                out << ',';
                if (e.parent != kNoParent) {
                    out << e.parent;
                }
            }
            out << '\n';
        }
    }
}

EventLog read_events(const std::string& path, double horizon) {
    auto in = open_in(path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) {
        fail(path, "empty events file");
    }
    ++line_no;
    bool labels = false;
    if (line == "cascade_id,user_id,time,generation,parent_idx") {
        labels = true;
    } else if (line != "cascade_id,user_id,time") {
        fail(path, "unrecognized header '" + line + "'", line_no);
    }
    std::map<long, Cascade> cascades;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != (labels ? 5u : 3u)) {
            fail(path, "expected " + std::to_string(labels ? 5 : 3) + " fields", line_no);
        }
        const long cascade_id = parse_long(fields[0], path, line_no);
        Event e;
        e.user = static_cast<int>(parse_long(fields[1], path, line_no));
        e.time = parse_double(fields[2], path, line_no);
        if (labels) {
            e.generation = fields[3].empty()
                               ? kUnknownGeneration
                               : static_cast<int>(parse_long(fields[3], path, line_no));
            e.parent = fields[4].empty() ? kNoParent : parse_long(fields[4], path, line_no);
        }
        Cascade& cascade = cascades[cascade_id];
        cascade.horizon = horizon;
        cascade.events.push_back(e);
    }
    EventLog log;
    log.cascades.reserve(cascades.size());
    for (auto& [id, cascade] : cascades) {
        log.cascades.push_back(std::move(cascade));
    }
    return log;
}

void write_vector(const std::string& path, const VectorXd& values,
                  const std::string& value_column) {
    auto out = open_out(path);
    out << "user_id," << value_column << "\n";
    for (Index i = 0; i < values.size(); ++i) {
        out << i << ',' << format_double(values[i]) << '\n';
    }
}

VectorXd read_vector(const std::string& path, Index m) {
    auto in = open_in(path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) {
        fail(path, "empty vector file");
    }
    ++line_no;
    VectorXd values = VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 2) {
            fail(path, "expected user_id,value", line_no);
        }
        const long user = parse_long(fields[0], path, line_no);
        if (user < 0 || user >= m) {
            fail(path, "user id out of range", line_no);
        }
        values[user] = parse_double(fields[1], path, line_no);
    }
    for (Index i = 0; i < m; ++i) {
        if (std::isnan(values[i])) {
            fail(path, "missing value for user " + std::to_string(i));
        }
    }
    return values;
}

SupportPattern read_support(const std::string& path, Index m) {
    auto in = open_in(path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) {
        fail(path, "empty support file");
    }
    ++line_no;
    SupportPattern support;
    support.m = m;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 2) {
            fail(path, "expected row,col", line_no);
        }
        const long row = parse_long(fields[0], path, line_no);
        const long col = parse_long(fields[1], path, line_no);
        if (row < 0 || row >= m || col < 0 || col >= m) {
            fail(path, "support entry out of range", line_no);
        }
        support.entries.emplace_back(row, col);
    }
    return support;
}

void write_solve_report(const std::string& path, const SolveReport& report,
                        const std::string& task_name, double gamma) {
    json j{{"task", task_name},
           {"gamma", gamma},
           {"objective", report.objective},
           {"iterations", report.iterations},
           {"converged", report.converged},
           {"budget_consumed", report.budget_consumed},
           {"nonzeros", report.nonzeros}};
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_trace_csv(const std::string& path, const std::vector<double>& trace) {
    auto out = open_out(path);
    out << "iteration,objective\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << i << ',' << format_double(trace[i]) << '\n';
    }
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    auto out = open_out(path);
    out << "gamma,# Non-zeros,Budget consumed,objective\n";
    for (const SweepRow& row : rows) {
        if (row.failed) {
            out << format_double(row.gamma) << ",,," << '\n';
            continue;
        }
        out << format_double(row.gamma) << ',' << row.nonzeros << ','
            << format_double(row.budget_consumed) << ',' << format_double(row.utility) << '\n';
    }
}

std::vector<EventLog> split_into_intervals(const EventLog& log) {
    std::vector<EventLog> intervals;
    intervals.reserve(log.cascades.size());
    for (const Cascade& cascade : log.cascades) {
        EventLog one;
        one.cascades.push_back(cascade);
        intervals.push_back(std::move(one));
    }
    return intervals;
}

} // namespace ash
