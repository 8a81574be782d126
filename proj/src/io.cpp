#include "krplev/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace krplev {

namespace {

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return out;
}

}  // namespace

SparseTensorCoo parse_tns(std::istream& in, const TnsOptions& opts) {
    std::vector<std::uint32_t> coords;
    std::vector<double> values;
    std::optional<std::vector<std::uint64_t>> header_dims;
    std::size_t arity = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            // Optional "# dims d1 d2 ..." header.
            std::vector<std::string> toks = split_ws(line.substr(first + 1));
            if (!toks.empty() && toks[0] == "dims") {
                std::vector<std::uint64_t> d;
                for (std::size_t k = 1; k < toks.size(); ++k)
                    d.push_back(std::stoull(toks[k]));
                if (!d.empty()) header_dims = std::move(d);
            }
            continue;
        }

        const std::vector<std::string> toks = split_ws(line);
        if (toks.size() < 2) fail_line(line_no, "expected coordinates and a value");
        if (arity == 0) {
            arity = toks.size() - 1;
        } else if (toks.size() != arity + 1) {
            fail_line(line_no, "inconsistent coordinate count");
        }

        for (std::size_t k = 0; k < arity; ++k) {
            long long c = 0;
            const auto& tok = toks[k];
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), c);
            if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
                fail_line(line_no, "non-integer coordinate '" + tok + "'");
            if (c <= 0) fail_line(line_no, "coordinate must be positive (1-based)");
            coords.push_back(static_cast<std::uint32_t>(c - 1));
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(toks[arity], &used);
            if (used != toks[arity].size()) throw std::invalid_argument("");
            values.push_back(v);
        } catch (const std::exception&) {
            fail_line(line_no, "non-numeric value '" + toks[arity] + "'");
        }
    }

    if (values.empty()) throw std::runtime_error("parse error: no tensor entries found");

    std::vector<std::uint64_t> dims;
    if (opts.dims) {
        dims = *opts.dims;
    } else if (header_dims) {
        dims = *header_dims;
    } else {
        dims.assign(arity, 0);
        for (std::size_t e = 0; e < values.size(); ++e)
            for (std::size_t k = 0; k < arity; ++k)
                dims[k] = std::max<std::uint64_t>(dims[k], coords[e * arity + k] + 1);
    }
    if (dims.size() != arity)
        throw std::runtime_error("parse error: dimension count does not match data arity");

    SparseTensorCoo t =
        SparseTensorCoo::from_entries(std::move(dims), std::move(coords), std::move(values));
    if (opts.preprocess == ValuePreprocess::Log)
        t.transform_values([](double v) { return std::log1p(v); });
    return t;
}

SparseTensorCoo parse_tns_file(const std::string& path, const TnsOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tensor file: " + path);
    return parse_tns(in, opts);
}

void write_tns(std::ostream& out, const SparseTensorCoo& tensor) {
    out << "# dims";
    for (std::uint64_t d : tensor.dims()) out << ' ' << d;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t e = 0; e < tensor.nnz(); ++e) {
        for (std::uint32_t c : tensor.coords(e)) out << (c + 1) << ' ';
        out << tensor.values()[e] << '\n';
    }
}

void write_model(std::ostream& out, const KruskalTensor& model) {
    out << std::setprecision(17);
    for (std::size_t r = 0; r < model.rank(); ++r)
        out << model.sigma[r] << (r + 1 == model.rank() ? '\n' : ' ');
    for (const Matrix& U : model.factors) {
        out << U.rows << ' ' << U.cols << '\n';
        for (std::size_t i = 0; i < U.rows; ++i) {
            for (std::size_t c = 0; c < U.cols; ++c)
                out << U(i, c) << (c + 1 == U.cols ? '\n' : ' ');
        }
    }
}

void write_model_file(const std::string& path, const KruskalTensor& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
    write_model(out, model);
}

KruskalTensor read_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("model file: missing weight line");
    KruskalTensor model;
    {
        std::istringstream iss(line);
        double v;
        while (iss >> v) model.sigma.push_back(v);
    }
    if (model.sigma.empty()) throw std::runtime_error("model file: empty weight line");

    std::size_t rows = 0, cols = 0;
    while (in >> rows >> cols) {
        if (cols != model.rank())
            throw std::runtime_error("model file: factor column count does not match rank");
        Matrix U(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t c = 0; c < cols; ++c)
                if (!(in >> U(i, c)))
                    throw std::runtime_error("model file: truncated factor data");
        model.factors.push_back(std::move(U));
    }
    if (model.factors.empty()) throw std::runtime_error("model file: no factors");
    return model;
}

KruskalTensor read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    return read_model(in);
}

}  // namespace krplev
