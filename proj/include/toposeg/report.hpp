#ifndef TOPOSEG_REPORT_HPP
#define TOPOSEG_REPORT_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace toposeg {

inline constexpr const char* report_csv_header =
    "stage,method,iteration,mse,psnr_db,cracks_total,regions,boundary_f1,wall_time_ms";

/// One row of the run report. boundary_f1 is NaN when no ground truth was
/// supplied ("nan" in CSV, null in JSON). Infinite PSNR serializes as "inf".
struct ReportRow {
    std::string stage;
    std::string method;
    int iteration = 0;
    double mse = 0.0;
    double psnr_db = std::numeric_limits<double>::infinity();
    std::int64_t cracks_total = 0;
    int regions = 0;
    double boundary_f1 = std::numeric_limits<double>::quiet_NaN();
    double wall_time_ms = 0.0;
};

namespace detail {

inline std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

} // namespace detail

inline std::string report_row_csv(const ReportRow& r) {
    std::ostringstream os;
    os << r.stage << ',' << r.method << ',' << r.iteration << ','
       << detail::format_real(r.mse) << ',' << detail::format_real(r.psnr_db) << ','
       << r.cracks_total << ',' << r.regions << ','
       << detail::format_real(r.boundary_f1) << ','
       << detail::format_real(r.wall_time_ms);
    return os.str();
}

inline nlohmann::json report_row_json(const ReportRow& r) {
    nlohmann::json j;
    j["stage"] = r.stage;
    j["method"] = r.method;
    j["iteration"] = r.iteration;
    j["mse"] = r.mse;
    if (std::isinf(r.psnr_db))
        j["psnr_db"] = "inf";
    else
        j["psnr_db"] = r.psnr_db;
    j["cracks_total"] = r.cracks_total;
    j["regions"] = r.regions;
    if (std::isnan(r.boundary_f1))
        j["boundary_f1"] = nullptr;
    else
        j["boundary_f1"] = r.boundary_f1;
    j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

/// Appends rows to a CSV report. A fresh file gets the header; an existing
/// file must already start with the exact header, and rows are appended.
inline void write_report_csv(const std::vector<ReportRow>& rows,
                             const std::string& path) {
    bool has_header = false;
    {
        std::ifstream in(path);
        if (in) {
            std::string first;
            std::getline(in, first);
            if (!first.empty() && first.back() == '\r') first.pop_back();
            if (first != report_csv_header)
                throw std::runtime_error(path + ": existing report has a different header");
            has_header = true;
        }
    }
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw std::runtime_error(path + ": cannot open report for writing");
    if (!has_header)
        out << report_csv_header << "\n";
    for (const auto& r : rows)
        out << report_row_csv(r) << "\n";
    if (!out)
        throw std::runtime_error(path + ": write failed");
}

/// JSON mirror: the file holds an array of row objects; appends to an
/// existing array.
inline void write_report_json(const std::vector<ReportRow>& rows,
                              const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    {
        std::ifstream in(path);
        if (in) {
            nlohmann::json existing = nlohmann::json::parse(in, nullptr, false);
            if (existing.is_array())
                arr = std::move(existing);
            else if (!existing.is_discarded())
                throw std::runtime_error(path + ": existing report is not a JSON array");
        }
    }
    for (const auto& r : rows)
        arr.push_back(report_row_json(r));
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path + ": cannot open report for writing");
    out << arr.dump(2) << "\n";
}

} // namespace toposeg

#endif
