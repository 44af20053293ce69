#include "icepath/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "icepath/errors.hpp"

namespace icepath::io {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_trial_csv(std::ostream& out, std::span<const sim::TrialRecord> rows) {
    out << kTrialHeader << '\n';
    for (const auto& t : rows) {
        out << fmt(t.l0) << ',' << t.a << ',' << fmt(t.l1) << ',' << t.d1 << ',' << t.r1 << ',' << fmt(t.l2) << ','
            << t.d2 << ',' << t.r2 << ',' << fmt(t.y) << '\n';
    }
}

void write_single_csv(std::ostream& out, std::span<const sim::SinglePeriodRecord> rows) {
    out << kSingleHeader << '\n';
    for (const auto& r : rows) {
        out << fmt(r.l0) << ',' << r.a << ',' << fmt(r.l1) << ',' << r.r << ',' << r.d << ',' << fmt(r.y) << ','
            << r.d_a_r0 << ',' << r.d_a_r1 << ',' << fmt(r.y_a_r0_d0) << ',' << fmt(r.y_a_r0_d1) << '\n';
    }
}

namespace {

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

std::vector<double> parse_row(const std::string& line, std::size_t expected, std::size_t lineno) {
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        std::size_t used = 0;
        double x = 0;
        try {
            x = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || trim(cell.substr(used)).size() != 0 || !std::isfinite(x)) {
            throw ValidationError("line " + std::to_string(lineno) + ": bad number '" + cell + "'");
        }
        v.push_back(x);
    }
    if (v.size() != expected) {
        throw ValidationError("line " + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                              " fields, got " + std::to_string(v.size()));
    }
    return v;
}

int binary(double x, const char* col, std::size_t lineno) {
    if (x != 0.0 && x != 1.0) {
        throw ValidationError("line " + std::to_string(lineno) + ": column " + col + " must be 0 or 1");
    }
    return static_cast<int>(x);
}

} // namespace

est::Dataset read_dataset(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ValidationError("empty dataset");
    header = trim(header);
    const std::string single_factual = "l0,a,l1,r,d,y";
    std::string line;
    std::size_t lineno = 1;
    if (header == kTrialHeader) {
        std::vector<sim::TrialRecord> rows;
        while (std::getline(in, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty()) continue;
            auto v = parse_row(line, 9, lineno);
            rows.push_back({v[0], binary(v[1], "a", lineno), v[2], binary(v[3], "d1", lineno),
                            binary(v[4], "r1", lineno), v[5], binary(v[6], "d2", lineno),
                            binary(v[7], "r2", lineno), v[8]});
        }
        return rows;
    }
    if (header == kSingleHeader || header == single_factual) {
        const std::size_t width = header == kSingleHeader ? 10 : 6;
        std::vector<sim::SinglePeriodRecord> rows;
        while (std::getline(in, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty()) continue;
            auto v = parse_row(line, width, lineno);
            sim::SinglePeriodRecord r;
            r.l0 = v[0];
            r.a = binary(v[1], "a", lineno);
            r.l1 = v[2];
            r.r = binary(v[3], "r", lineno);
            r.d = binary(v[4], "d", lineno);
            r.y = v[5];
            if (width == 10) {
                r.d_a_r0 = binary(v[6], "d_a_r0", lineno);
                r.d_a_r1 = binary(v[7], "d_a_r1", lineno);
                r.y_a_r0_d0 = v[8];
                r.y_a_r0_d1 = v[9];
            }
            rows.push_back(r);
        }
        return rows;
    }
    throw ValidationError("unrecognised CSV header '" + header + "'");
}

est::Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return read_dataset(in);
}

} // namespace icepath::io
