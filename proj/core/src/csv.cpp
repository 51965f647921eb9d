#include "calib/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace calib {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

double parse_cell(const std::string& cell, const std::string& path, std::size_t line_no,
                  std::size_t col) {
    const std::string t = strip(cell);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE)
        throw data_error(path + ": line " + std::to_string(line_no) + ", column " +
                         std::to_string(col + 1) + ": not a number: '" + t + "'");
    return v;
}

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

RawCsv read_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error(path + ": cannot open file");
    RawCsv csv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 &&
            static_cast<unsigned char>(line[0]) == 0xEF)
            line = line.substr(3);  // strip UTF-8 BOM
        const std::string stripped = strip(line);
        if (stripped.empty()) continue;
        if (csv.header.empty()) {
            for (const auto& h : split_line(stripped)) csv.header.push_back(strip(h));
            continue;
        }
        const auto cells = split_line(stripped);
        if (cells.size() != csv.header.size())
            throw data_error(path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(csv.header.size()) + " columns, got " +
                             std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            row[c] = parse_cell(cells[c], path, line_no, c);
        csv.rows.push_back(std::move(row));
    }
    if (csv.header.empty()) throw data_error(path + ": empty file");
    if (csv.rows.empty()) throw data_error(path + ": no data rows");
    return csv;
}

}  // namespace

ExperimentalDataset read_experimental_csv(const std::string& path) {
    const RawCsv csv = read_raw(path);
    if (csv.header.size() < 2)
        throw data_error(path + ": need at least one input column and one output column");
    const Eigen::Index n = static_cast<Eigen::Index>(csv.rows.size());
    const Eigen::Index p = static_cast<Eigen::Index>(csv.header.size()) - 1;
    ExperimentalDataset ds;
    ds.inputs.resize(n, p);
    ds.outputs.resize(n);
    ds.input_names.assign(csv.header.begin(), csv.header.end() - 1);
    ds.output_name = csv.header.back();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) ds.inputs(i, j) = csv.rows[i][j];
        ds.outputs[i] = csv.rows[i][p];
    }
    return ds;
}

SimulatorDataset read_simulator_csv(const std::string& path, Eigen::Index param_dim) {
    const RawCsv csv = read_raw(path);
    const Eigen::Index cols = static_cast<Eigen::Index>(csv.header.size());
    if (param_dim < 1) throw data_error("read_simulator_csv: parameter dimension must be >= 1");
    if (cols < param_dim + 2)
        throw data_error(path + ": expected at least " + std::to_string(param_dim + 2) +
                         " columns (inputs, " + std::to_string(param_dim) +
                         " parameters, output), got " + std::to_string(cols));
    const Eigen::Index m = static_cast<Eigen::Index>(csv.rows.size());
    const Eigen::Index p = cols - param_dim - 1;
    SimulatorDataset ds;
    ds.inputs.resize(m, p);
    ds.params.resize(m, param_dim);
    ds.outputs.resize(m);
    ds.input_names.assign(csv.header.begin(), csv.header.begin() + p);
    ds.param_names.assign(csv.header.begin() + p, csv.header.begin() + p + param_dim);
    ds.output_name = csv.header.back();
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) ds.inputs(i, j) = csv.rows[i][j];
        for (Eigen::Index k = 0; k < param_dim; ++k) ds.params(i, k) = csv.rows[i][p + k];
        ds.outputs[i] = csv.rows[i][cols - 1];
    }
    return ds;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error(tmp + ": cannot open for writing");
        out << content;
        if (!out) throw data_error(tmp + ": write failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw data_error(path + ": rename failed: " + std::strerror(errno));
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
    if (static_cast<Eigen::Index>(header.size()) != rows.cols())
        throw data_error("write_csv: header width does not match data");
    std::ostringstream os;
    for (std::size_t j = 0; j < header.size(); ++j)
        os << (j ? "," : "") << header[j];
    os << "\n";
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j)
            os << (j ? "," : "") << format_double(rows(i, j));
        os << "\n";
    }
    write_text_atomic(path, os.str());
}

}  // namespace calib
