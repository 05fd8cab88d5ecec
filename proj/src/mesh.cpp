#include "feast/mesh.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>

#include "feast/errors.hpp"
#include "feast/graph.hpp"
#include "feast/rng.hpp"

namespace feast {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

void validate_mesh(const Mesh& mesh) {
    const int n = mesh.num_vertices();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int v : face)
            if (v < 0 || v >= n)
                throw ValueError("mesh: face " + std::to_string(f) + " references vertex " +
                                 std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw ValueError("mesh: face " + std::to_string(f) + " is degenerate");
    }
}

namespace {

// Next non-blank, non-comment line.
bool next_content_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r\n");
        if (pos == std::string::npos) continue;
        if (line[pos] == '#') continue;
        return true;
    }
    return false;
}

} // namespace

Mesh load_off(std::istream& in) {
    std::string line;
    if (!next_content_line(in, line)) throw ParseError("OFF: empty stream");

    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "OFF") throw ParseError("OFF: bad header '" + tag + "'");

    long nv = -1, nf = -1, ne = 0;
    // Counts may follow the OFF tag on the same line or sit on the next one.
    if (!(header >> nv >> nf >> ne)) {
        if (!next_content_line(in, line)) throw ParseError("OFF: missing counts line");
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) throw ParseError("OFF: bad counts line '" + line + "'");
    }
    if (nv < 0 || nf < 0) throw ParseError("OFF: negative counts");

    Mesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(in, line))
            throw ParseError("OFF: truncated at vertex " + std::to_string(i));
        std::istringstream vs(line);
        Vec3 p;
        if (!(vs >> p.x >> p.y >> p.z))
            throw ParseError("OFF: bad vertex line '" + line + "'");
        mesh.vertices.push_back(p);
    }

    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long f = 0; f < nf; ++f) {
        if (!next_content_line(in, line))
            throw ParseError("OFF: truncated at face " + std::to_string(f));
        std::istringstream fs(line);
        int arity = 0;
        if (!(fs >> arity)) throw ParseError("OFF: bad face line '" + line + "'");
        if (arity != 3) throw ParseError("OFF: only triangular faces supported, got arity " +
                                         std::to_string(arity));
        std::array<int, 3> face{};
        for (int k = 0; k < 3; ++k) {
            if (!(fs >> face[k])) throw ParseError("OFF: bad face line '" + line + "'");
            if (face[k] < 0 || face[k] >= nv)
                throw ParseError("OFF: face index " + std::to_string(face[k]) +
                                 " out of range [0, " + std::to_string(nv) + ")");
        }
        mesh.faces.push_back(face);
    }

    validate_mesh(mesh);
    return mesh;
}

Mesh load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return load_off(in);
}

void save_off(const Mesh& mesh, std::ostream& out) {
    out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << " 0\n";
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

void save_off(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    save_off(mesh, out);
}

std::vector<double> local_edge_scale(const Mesh& mesh) {
    const Graph g = one_ring(mesh);
    std::vector<double> scale(mesh.vertices.size(), 0.0);
    for (int i = 0; i < g.n; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int j : g.neighbors[i]) {
            if (j == i) continue;
            sum += (mesh.vertices[j] - mesh.vertices[i]).norm();
            ++count;
        }
        if (count > 0) scale[i] = sum / count;
    }
    return scale;
}

Mesh add_vertex_noise(const Mesh& mesh, double sigma_rel, std::uint64_t seed) {
    if (sigma_rel < 0.0) throw ValueError("add_vertex_noise: negative sigma_rel");
    if (sigma_rel == 0.0) return mesh;

    const std::vector<double> scale = local_edge_scale(mesh);
    Rng rng(seed);
    Mesh out = mesh;
    for (std::size_t i = 0; i < out.vertices.size(); ++i) {
        const double s = sigma_rel * scale[i];
        out.vertices[i].x += rng.normal(0.0, s);
        out.vertices[i].y += rng.normal(0.0, s);
        out.vertices[i].z += rng.normal(0.0, s);
    }
    return out;
}

std::vector<double> geodesic_distances(const Mesh& mesh, int source) {
    const int n = mesh.num_vertices();
    if (source < 0 || source >= n) throw ValueError("geodesic_distances: source out of range");
    const Graph g = one_ring(mesh);

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    dist[source] = 0.0;

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    heap.push({0.0, source});
    while (!heap.empty()) {
        auto [d, i] = heap.top();
        heap.pop();
        if (d > dist[i]) continue;
        for (int j : g.neighbors[i]) {
            if (j == i) continue;
            const double nd = d + (mesh.vertices[j] - mesh.vertices[i]).norm();
            if (nd < dist[j]) {
                dist[j] = nd;
                heap.push({nd, j});
            }
        }
    }
    return dist;
}

Matrix xyz_features(const Mesh& mesh, bool center) {
    const int n = mesh.num_vertices();
    Vec3 c{0, 0, 0};
    if (center && n > 0) {
        for (const auto& v : mesh.vertices) c = c + v;
        c = c * (1.0 / n);
    }
    Matrix X(n, 3);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = mesh.vertices[i].x - c.x;
        X(i, 1) = mesh.vertices[i].y - c.y;
        X(i, 2) = mesh.vertices[i].z - c.z;
    }
    return X;
}

Mesh translated(const Mesh& mesh, const Vec3& t) {
    Mesh out = mesh;
    for (auto& v : out.vertices) v = v + t;
    return out;
}

} // namespace feast
