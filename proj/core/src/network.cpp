#include "peregrinn/network.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace peregrinn {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) throw ValueError(std::string("network: non-finite entry in ") + what);
}

}  // namespace

Network::Network(std::vector<Layer> layers, int input_dim, bool final_relu)
    : layers_(std::move(layers)), input_dim_(input_dim), final_relu_(final_relu) {
    if (layers_.empty()) throw ShapeError("network: at least one layer required");
    if (input_dim_ <= 0) throw ShapeError("network: input dimension must be positive");
    int prev = input_dim_;
    for (size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.weights.rows() != l.bias.size())
            throw ShapeError("network: layer " + std::to_string(i + 1) +
                             " weight rows do not match bias length");
        if (l.weights.cols() != prev)
            throw ShapeError("network: layer " + std::to_string(i + 1) + " expects input " +
                             std::to_string(l.weights.cols()) + ", got " + std::to_string(prev));
        if (l.weights.rows() == 0) throw ShapeError("network: empty layer");
        check_finite(l.weights, "weights");
        check_finite(l.bias, "bias");
        prev = l.out_dim();
    }
}

int Network::relu_neuron_count() const {
    int n = 0;
    for (int i = 1; i <= relu_layer_count(); ++i) n += width(i);
    return n;
}

ActivationPattern ActivationPattern::free_for(const Network& net) {
    ActivationPattern p;
    p.phases.resize(net.layer_count());
    for (int i = 1; i <= net.layer_count(); ++i)
        p.phases[i - 1].assign(net.width(i), Phase::Free);
    return p;
}

AffineMap::AffineMap(Eigen::MatrixXd m, Eigen::VectorXd o)
    : matrix(std::move(m)), offset(std::move(o)) {
    if (matrix.rows() != offset.size())
        throw ShapeError("affine map: matrix rows do not match offset length");
}

AffineMap AffineMap::identity(int dim) {
    return AffineMap(Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim));
}

Eigen::VectorXd AffineMap::apply(const Eigen::VectorXd& x) const {
    if (x.size() != in_dim()) throw ShapeError("affine map: input dimension mismatch");
    return matrix * x + offset;
}

AffineMap compose(const AffineMap& outer, const AffineMap& inner) {
    if (outer.in_dim() != inner.out_dim())
        throw ShapeError("compose: outer input dimension does not match inner output");
    return AffineMap(outer.matrix * inner.matrix, outer.matrix * inner.offset + outer.offset);
}

ForwardResult forward(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim()) throw ShapeError("forward: input dimension mismatch");
    ForwardResult res;
    res.pattern = ActivationPattern::free_for(net);
    Eigen::VectorXd y = x;
    for (int i = 1; i <= net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        Eigen::VectorXd pre = l.weights * y + l.bias;
        res.preacts.push_back(pre);
        const bool relu = i <= net.relu_layer_count();
        for (int j = 0; j < pre.size(); ++j)
            res.pattern.set(i, j, pre[j] > 0.0 ? Phase::Active : Phase::Inactive);
        y = relu ? pre.cwiseMax(0.0).eval() : pre;
    }
    res.output = y;
    return res;
}

AffineMap fold_affine(const Network& net, const ActivationPattern& pattern, int through_layer) {
    if (through_layer < 0 || through_layer > net.layer_count())
        throw ShapeError("fold_affine: layer index out of range");
    AffineMap map = AffineMap::identity(net.input_dim());
    for (int i = 1; i <= through_layer; ++i) {
        const Layer& l = net.layer(i);
        Eigen::MatrixXd m = l.weights * map.matrix;
        Eigen::VectorXd c = l.weights * map.offset + l.bias;
        if (i <= net.relu_layer_count()) {
            for (int j = 0; j < l.out_dim(); ++j) {
                const Phase p = pattern.at(i, j);
                if (p == Phase::Free)
                    throw PhaseError("fold_affine: unfixed neuron in layer " + std::to_string(i));
                if (p == Phase::Inactive) {
                    m.row(j).setZero();
                    c[j] = 0.0;
                }
            }
        }
        map = AffineMap(std::move(m), std::move(c));
    }
    return map;
}

namespace {

Network load_json(std::istream& source) {
    nlohmann::json doc;
    try {
        source >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network json: ") + e.what());
    }
    try {
        const int input_dim = doc.at("input_dim").get<int>();
        const bool final_relu = doc.value("final_relu", true);
        std::vector<Layer> layers;
        for (const auto& jl : doc.at("layers")) {
            const auto& jw = jl.at("weights");
            const size_t rows = jw.size();
            if (rows == 0) throw ParseError("network json: empty weight matrix");
            const size_t cols = jw.at(0).size();
            Layer l;
            l.weights.resize(rows, cols);
            for (size_t r = 0; r < rows; ++r) {
                if (jw.at(r).size() != cols)
                    throw ShapeError("network json: ragged weight matrix");
                for (size_t c = 0; c < cols; ++c) l.weights(r, c) = jw.at(r).at(c).get<double>();
            }
            const auto& jb = jl.at("bias");
            l.bias.resize(jb.size());
            for (size_t r = 0; r < jb.size(); ++r) l.bias[r] = jb.at(r).get<double>();
            layers.push_back(std::move(l));
        }
        return Network(std::move(layers), input_dim, final_relu);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("network json: ") + e.what());
    }
}

std::vector<double> parse_csv_line(std::istream& in, const char* what) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("//", 0) == 0) continue;
        if (line.find_first_not_of(" \t\r\n,") == std::string::npos) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const size_t a = item.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            try {
                vals.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ParseError(std::string("nnet: bad number in ") + what + ": '" + item + "'");
            }
        }
        return vals;
    }
    throw ParseError(std::string("nnet: unexpected end of file reading ") + what);
}

Network load_nnet(std::istream& source) {
    auto header = parse_csv_line(source, "header");
    if (header.size() < 4) throw ParseError("nnet: short header line");
    const int num_layers = static_cast<int>(header[0]);
    const int input_size = static_cast<int>(header[1]);
    if (num_layers < 1 || input_size < 1) throw ParseError("nnet: bad layer/input counts");

    auto sizes_d = parse_csv_line(source, "layer sizes");
    if (static_cast<int>(sizes_d.size()) != num_layers + 1)
        throw ShapeError("nnet: layer size line does not match layer count");
    std::vector<int> sizes(sizes_d.begin(), sizes_d.end());
    if (sizes[0] != input_size) throw ShapeError("nnet: input size disagrees with header");

    parse_csv_line(source, "flag");
    parse_csv_line(source, "input minimums");
    parse_csv_line(source, "input maximums");
    auto means = parse_csv_line(source, "means");
    auto ranges = parse_csv_line(source, "ranges");
    if (static_cast<int>(means.size()) != input_size + 1 ||
        static_cast<int>(ranges.size()) != input_size + 1)
        throw ShapeError("nnet: normalization lines must have input_size+1 entries");

    std::vector<Layer> layers;
    for (int i = 0; i < num_layers; ++i) {
        Layer l;
        l.weights.resize(sizes[i + 1], sizes[i]);
        for (int r = 0; r < sizes[i + 1]; ++r) {
            auto row = parse_csv_line(source, "weight row");
            if (static_cast<int>(row.size()) != sizes[i])
                throw ShapeError("nnet: weight row length mismatch in layer " + std::to_string(i + 1));
            for (int c = 0; c < sizes[i]; ++c) l.weights(r, c) = row[c];
        }
        l.bias.resize(sizes[i + 1]);
        for (int r = 0; r < sizes[i + 1]; ++r) {
            auto row = parse_csv_line(source, "bias entry");
            if (row.size() != 1) throw ShapeError("nnet: bias lines carry one value each");
            l.bias[r] = row[0];
        }
        layers.push_back(std::move(l));
    }

    // Fold input normalization (x - mean)/range into the first layer and the
    // output denormalization y*range + mean into the last (linear) layer.
    Eigen::VectorXd inv_range(input_size), shift(input_size);
    for (int j = 0; j < input_size; ++j) {
        if (ranges[j] == 0.0) throw ValueError("nnet: zero input range");
        inv_range[j] = 1.0 / ranges[j];
        shift[j] = -means[j] / ranges[j];
    }
    Layer& first = layers.front();
    first.bias += first.weights * shift;
    first.weights = first.weights * inv_range.asDiagonal();

    const double out_range = ranges[input_size];
    const double out_mean = means[input_size];
    Layer& last = layers.back();
    last.weights *= out_range;
    last.bias = last.bias.array() * out_range + out_mean;

    return Network(std::move(layers), input_size, /*final_relu=*/false);
}

}  // namespace

Network load_network(std::istream& source, NetworkFormat format) {
    return format == NetworkFormat::Json ? load_json(source) : load_nnet(source);
}

Network load_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("network: cannot open '" + path + "'");
    const bool nnet = path.size() >= 5 && path.substr(path.size() - 5) == ".nnet";
    return load_network(in, nnet ? NetworkFormat::NNet : NetworkFormat::Json);
}

}  // namespace peregrinn
