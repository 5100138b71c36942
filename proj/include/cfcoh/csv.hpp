#pragma once

// CSV emitters (full-precision scientific notation, LF line endings) and the
// trajectory reader used to re-estimate CF from a stored run.

#include "cfcoh/coherency.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace cfcoh::csv {

inline std::string number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
}

namespace detail {

inline void write_row(std::ostream& os, const std::vector<std::string>& cells)
{
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) {
            os << ',';
        }
        os << cells[k];
    }
    os << '\n';
}

} // namespace detail

/// time, v_<bus>_re/im per bus, i_<dev>_re/im per device, rho_<dev>/omega_<dev> per device.
inline void write_trajectory(std::ostream& os, const Trajectory& tr)
{
    std::vector<std::string> head{"time"};
    for (const auto& b : tr.bus_names) {
        head.push_back("v_" + b + "_re");
        head.push_back("v_" + b + "_im");
    }
    for (const auto& d : tr.device_names) {
        head.push_back("i_" + d + "_re");
        head.push_back("i_" + d + "_im");
    }
    for (const auto& d : tr.device_names) {
        head.push_back("rho_" + d);
        head.push_back("omega_" + d);
    }
    detail::write_row(os, head);
    for (std::size_t k = 0; k < tr.sample_count(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        std::vector<std::string> row{number(tr.times[k])};
        for (Eigen::Index b = 0; b < tr.voltages.cols(); ++b) {
            row.push_back(number(tr.voltages(r, b).real()));
            row.push_back(number(tr.voltages(r, b).imag()));
        }
        for (Eigen::Index d = 0; d < tr.currents.cols(); ++d) {
            row.push_back(number(tr.currents(r, d).real()));
            row.push_back(number(tr.currents(r, d).imag()));
        }
        for (Eigen::Index d = 0; d < tr.device_cf.cols(); ++d) {
            row.push_back(number(tr.device_cf(r, d).real()));
            row.push_back(number(tr.device_cf(r, d).imag()));
        }
        detail::write_row(os, row);
    }
}

/// time, rho/omega per named series, plus a validity column per series.
inline void write_cf(std::ostream& os, const std::vector<std::string>& names, std::span<const CfTrajectory> cfs)
{
    std::vector<std::string> head{"time"};
    for (const auto& n : names) {
        head.push_back("rho_" + n);
        head.push_back("omega_" + n);
        head.push_back("valid_" + n);
    }
    detail::write_row(os, head);
    const std::size_t samples = cfs.empty() ? 0 : cfs.front().size();
    for (std::size_t k = 0; k < samples; ++k) {
        std::vector<std::string> row{number(cfs.front().times[k])};
        for (const auto& cf : cfs) {
            row.push_back(number(cf.values[k].rho));
            row.push_back(number(cf.values[k].omega));
            row.push_back(cf.valid[k] ? "1" : "0");
        }
        detail::write_row(os, row);
    }
}

inline void write_distance(std::ostream& os, const CoherencyDistanceMatrix& d)
{
    std::vector<std::string> head{"device"};
    head.insert(head.end(), d.labels.begin(), d.labels.end());
    detail::write_row(os, head);
    for (std::size_t a = 0; a < d.size(); ++a) {
        std::vector<std::string> row{d.labels[a]};
        for (std::size_t b = 0; b < d.size(); ++b) {
            row.push_back(number(d.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))));
        }
        detail::write_row(os, row);
    }
}

inline void write_partition(std::ostream& os, const std::vector<std::string>& labels, const std::vector<int>& groups)
{
    detail::write_row(os, {"device", "group"});
    for (std::size_t k = 0; k < labels.size(); ++k) {
        detail::write_row(os, {labels[k], std::to_string(groups[k])});
    }
}

inline void write_dendrogram(std::ostream& os, const ClusterTree& tree)
{
    detail::write_row(os, {"step", "left", "right", "height"});
    for (std::size_t s = 0; s < tree.merges().size(); ++s) {
        const auto& m = tree.merges()[s];
        detail::write_row(os, {std::to_string(s), std::to_string(m.left), std::to_string(m.right), number(m.height)});
    }
}

/// First row: "alpha\\beta", then beta values; each further row: alpha then the cells.
inline void write_sweep(std::ostream& os, const SweepResult& res)
{
    std::vector<std::string> head{"alpha\\beta"};
    for (double b : res.beta) {
        head.push_back(number(b));
    }
    detail::write_row(os, head);
    for (std::size_t i = 0; i < res.alpha.size(); ++i) {
        std::vector<std::string> row{number(res.alpha[i])};
        for (std::size_t j = 0; j < res.beta.size(); ++j) {
            row.push_back(number(res.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
        detail::write_row(os, row);
    }
}

/// Writes via `fn(stream)` to `path` in binary mode so line endings stay LF.
template <class Fn>
void write_file(const std::string& path, Fn&& fn)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    fn(out);
    if (!out) {
        throw std::runtime_error("write failed for " + path);
    }
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::ptrdiff_t column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : it - header.begin();
    }
};

/// Numeric CSV with a header line.
inline Table read_table(std::istream& in)
{
    Table t;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty CSV");
    }
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') {
                cell.pop_back();
            }
            cells.push_back(cell);
        }
        return cells;
    };
    t.header = split(line);
    t.columns.resize(t.header.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw std::runtime_error("CSV line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(t.header.size()) + " cells");
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size() || cells[c].empty()) {
                throw std::runtime_error("CSV line " + std::to_string(line_no) + ": '" + cells[c] +
                                         "' is not a number");
            }
            t.columns[c].push_back(v);
        }
    }
    return t;
}

/// Series names found as "<prefix><name>_re" / "<prefix><name>_im" column pairs.
inline std::vector<std::string> complex_series(const Table& t, const std::string& prefix)
{
    std::vector<std::string> names;
    for (const auto& h : t.header) {
        if (h.size() > prefix.size() + 3 && h.starts_with(prefix) && h.ends_with("_re")) {
            const auto name = h.substr(prefix.size(), h.size() - prefix.size() - 3);
            if (t.column(prefix + name + "_im") >= 0) {
                names.push_back(name);
            }
        }
    }
    return names;
}

} // namespace cfcoh::csv
