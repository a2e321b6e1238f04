#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "canvass/graph.hpp"

namespace canvass {

using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw SchemaError("schema error in " + path + ": " + e.what());
    }
    return doc;
}

int require_int(const json& doc, const char* field) {
    if (!doc.contains(field) || !doc[field].is_number_integer())
        throw SchemaError(std::string("schema error: missing or non-integer field '") + field + "'");
    return doc[field].get<int>();
}

std::vector<int> read_id_array(const json& arr, int n, const std::string& what) {
    std::vector<int> out;
    out.reserve(arr.size());
    for (const auto& e : arr) {
        if (!e.is_number_integer()) throw SchemaError("schema error: non-integer id in " + what);
        const int v = e.get<int>();
        if (v < 0 || v >= n) throw ValidationError("validation error: id " + std::to_string(v) + " out of range in " + what);
        out.push_back(v);
    }
    return out;
}

Dataset load_json_graph(const std::string& path) {
    const json doc = load_json_file(path);
    const int n = require_int(doc, "n");
    const int d = require_int(doc, "d");
    if (n < 0 || d < 0) throw ValidationError("validation error: negative n or d");

    Graph g(n, d);

    if (!doc.contains("labels") || !doc["labels"].is_array())
        throw SchemaError("schema error: missing 'labels' array");
    if (static_cast<int>(doc["labels"].size()) != n)
        throw SchemaError("schema error: 'labels' length != n");
    for (int v = 0; v < n; ++v) {
        const auto& e = doc["labels"][v];
        if (!e.is_number_integer() || (e.get<int>() != 0 && e.get<int>() != 1))
            throw ValidationError("validation error: non-binary label at node " + std::to_string(v));
        g.set_label(v, e.get<int>());
    }

    if (!doc.contains("features") || !doc["features"].is_array())
        throw SchemaError("schema error: missing 'features' array");
    if (static_cast<int>(doc["features"].size()) != n)
        throw SchemaError("schema error: 'features' length != n");
    for (int v = 0; v < n; ++v) {
        const auto& row = doc["features"][v];
        if (!row.is_array()) throw SchemaError("schema error: features row " + std::to_string(v) + " not an array");
        for (const auto& e : row) {
            if (!e.is_number_integer()) throw SchemaError("schema error: non-integer feature bit at node " + std::to_string(v));
            const int b = e.get<int>();
            if (b < 0 || b >= d) throw ValidationError("validation error: feature bit " + std::to_string(b) + " out of range at node " + std::to_string(v));
            if (g.has_feature(v, b)) throw ValidationError("validation error: duplicate feature bit at node " + std::to_string(v));
            g.set_feature(v, b, true);
        }
    }

    if (!doc.contains("edges") || !doc["edges"].is_array())
        throw SchemaError("schema error: missing 'edges' array");
    long long idx = 0;
    for (const auto& e : doc["edges"]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
            throw SchemaError("schema error: edge #" + std::to_string(idx) + " is not an [u,v] pair");
        const int u = e[0].get<int>();
        const int v = e[1].get<int>();
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw ValidationError("validation error: edge #" + std::to_string(idx) + " endpoint out of range");
        if (u >= v) throw ValidationError("validation error: edge #" + std::to_string(idx) + " must satisfy u < v");
        if (g.has_edge(u, v)) throw ValidationError("validation error: duplicate edge #" + std::to_string(idx));
        g.add_edge(u, v);
        ++idx;
    }

    Dataset ds;
    ds.graph = std::move(g);
    if (doc.contains("split")) {
        const auto& sp = doc["split"];
        if (!sp.is_object() || !sp.contains("train") || !sp.contains("val") || !sp.contains("test"))
            throw SchemaError("schema error: 'split' must contain train/val/test arrays");
        Split s;
        s.train = read_id_array(sp["train"], n, "split.train");
        s.val = read_id_array(sp["val"], n, "split.val");
        s.test = read_id_array(sp["test"], n, "split.test");
        ds.split = std::move(s);
    }
    ds.graph.validate();
    return ds;
}

Dataset load_edgelist_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path);
    std::string line;
    int lineno = 0;
    if (!std::getline(in, line)) throw SchemaError("schema error: empty edge-list file " + path);
    ++lineno;
    std::istringstream header(line);
    int n = -1, d = -1;
    if (!(header >> n >> d) || n < 0 || d < 0)
        throw SchemaError("schema error: line 1 must be 'n d'");

    Graph g(n, d);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        int u, v;
        if (!(ls >> u >> v))
            throw SchemaError("schema error: line " + std::to_string(lineno) + " is not 'u v'");
        std::string rest;
        if (ls >> rest)
            throw SchemaError("schema error: line " + std::to_string(lineno) + " has trailing tokens");
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw ValidationError("validation error: line " + std::to_string(lineno) + " endpoint out of range");
        if (u == v) throw ValidationError("validation error: line " + std::to_string(lineno) + " is a self-loop");
        if (g.has_edge(u, v))
            throw ValidationError("validation error: line " + std::to_string(lineno) + " repeats an edge (asymmetric or duplicate listing)");
        g.add_edge(u, v);
    }

    const auto dir = std::filesystem::path(path).parent_path();
    {
        const auto fpath = (dir / "features.csv").string();
        std::ifstream fin(fpath);
        if (!fin) throw SchemaError("cannot open " + fpath);
        int row = 0;
        while (std::getline(fin, line)) {
            if (row >= n) throw SchemaError("schema error: features.csv has more than n rows");
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                if (cell.empty()) continue;
                int b;
                try {
                    b = std::stoi(cell);
                } catch (...) {
                    throw SchemaError("schema error: features.csv row " + std::to_string(row + 1) + " has non-integer cell '" + cell + "'");
                }
                if (b < 0 || b >= d)
                    throw ValidationError("validation error: features.csv row " + std::to_string(row + 1) + " bit out of range");
                g.set_feature(row, b, true);
            }
            ++row;
        }
        if (row != n) throw SchemaError("schema error: features.csv has " + std::to_string(row) + " rows, expected n");
    }
    {
        const auto lpath = (dir / "labels.csv").string();
        std::ifstream lin(lpath);
        if (!lin) throw SchemaError("cannot open " + lpath);
        int row = 0;
        while (std::getline(lin, line)) {
            if (line.empty()) continue;
            if (row >= n) throw SchemaError("schema error: labels.csv has more than n rows");
            int y;
            try {
                y = std::stoi(line);
            } catch (...) {
                throw SchemaError("schema error: labels.csv row " + std::to_string(row + 1) + " is not an integer");
            }
            if (y != 0 && y != 1)
                throw ValidationError("validation error: labels.csv row " + std::to_string(row + 1) + " is not binary");
            g.set_label(row, y);
            ++row;
        }
        if (row != n) throw SchemaError("schema error: labels.csv has " + std::to_string(row) + " rows, expected n");
    }
    g.validate();
    return Dataset{std::move(g), std::nullopt};
}

}  // namespace

Dataset load_graph(const std::string& path, GraphFormat format) {
    return format == GraphFormat::json ? load_json_graph(path) : load_edgelist_graph(path);
}

void save_graph(const Graph& graph, const std::string& path, const Split* split) {
    json doc;
    doc["n"] = graph.n();
    doc["d"] = graph.d();
    json edges = json::array();
    for (int u = 0; u < graph.n(); ++u)
        for (int v : graph.neighbors(u))
            if (u < v) edges.push_back({u, v});
    doc["edges"] = std::move(edges);
    json feats = json::array();
    for (int v = 0; v < graph.n(); ++v) feats.push_back(graph.feature_bits(v));
    doc["features"] = std::move(feats);
    doc["labels"] = graph.labels();
    if (split) doc["split"] = {{"train", split->train}, {"val", split->val}, {"test", split->test}};
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path);
    out << doc.dump() << "\n";
}

}  // namespace canvass
