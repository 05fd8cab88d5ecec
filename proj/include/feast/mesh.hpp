#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "feast/matrix.hpp"

namespace feast {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const;
};

// Triangle mesh: vertex positions plus faces as vertex-index triples.
// Faces must reference valid, pairwise-distinct vertices.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }
};

// Checks the Mesh invariants, throwing ValueError on violation.
void validate_mesh(const Mesh& mesh);

// Parses an ASCII OFF stream. Blank lines and '#' comments are skipped.
// Throws ParseError on a malformed header, out-of-range face index,
// non-triangular or degenerate face, or a truncated stream.
Mesh load_off(std::istream& in);
Mesh load_off(const std::string& path);

void save_off(const Mesh& mesh, std::ostream& out);
void save_off(const Mesh& mesh, const std::string& path);

// Mean Euclidean length of the edges incident to each vertex. Vertices with
// no incident edge get scale 0.
std::vector<double> local_edge_scale(const Mesh& mesh);

// Displaces each vertex by isotropic Gaussian noise whose per-axis standard
// deviation is sigma_rel times that vertex's mean incident edge length.
// Faces are untouched. sigma_rel = 0 returns the input bit-exactly.
Mesh add_vertex_noise(const Mesh& mesh, double sigma_rel, std::uint64_t seed);

// Shortest-path distance from `source` to every vertex over the edge graph
// with Euclidean edge lengths. Unreachable vertices get +infinity.
std::vector<double> geodesic_distances(const Mesh& mesh, int source);

// N x 3 feature matrix of vertex coordinates; `center` subtracts the
// centroid first (no scaling).
Matrix xyz_features(const Mesh& mesh, bool center = true);

Mesh translated(const Mesh& mesh, const Vec3& t);

} // namespace feast
