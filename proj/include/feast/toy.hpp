#pragma once

#include <cstdint>
#include <vector>

#include "feast/mesh.hpp"
#include "feast/trainer.hpp"

namespace feast {

// Unit sphere obtained by midpoint-subdividing an icosahedron. Vertex counts
// by subdivision level: 12, 42, 162, 642, 2562, ...
Mesh icosphere(int subdivisions);

// Smooth seeded deformation: each vertex is scaled radially by
// 1 + sum_k a_k sin(b_k (p . d_k) + phi_k), with amplitudes small enough to
// keep the factor positive. Connectivity is unchanged, so vertex i of the
// result corresponds to vertex i of the input.
Mesh deform_radially(const Mesh& mesh, std::uint64_t seed, double strength = 1.0);

// Training sample for vertex-index correspondence: 1-ring graph, XYZ
// features, identity targets, and per-vertex noise scales.
TrainSample correspondence_sample(const Mesh& mesh, bool center_features = true);

struct ToyOptions {
    int subdivisions = 2;   // 162 vertices
    int num_deformed = 1;   // deformed copies alongside the base sphere
    double deform_strength = 1.0;
    bool center_features = true;
    std::uint64_t seed = 0;
};

// The built-in correspondence task: a base icosphere plus seeded deformed
// copies, every vertex labeled with its own index.
std::vector<TrainSample> toy_correspondence_samples(const ToyOptions& opt);

// The base mesh the toy task predicts indices into (for geodesic curves).
Mesh toy_reference_mesh(const ToyOptions& opt);

} // namespace feast
