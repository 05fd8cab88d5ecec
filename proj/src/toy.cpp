#include "feast/toy.hpp"

#include <cmath>
#include <map>
#include <utility>

#include "feast/errors.hpp"
#include "feast/graph.hpp"
#include "feast/rng.hpp"

namespace feast {

namespace {

Vec3 normalized(const Vec3& v) {
    const double n = v.norm();
    return {v.x / n, v.y / n, v.z / n};
}

} // namespace

Mesh icosphere(int subdivisions) {
    if (subdivisions < 0) throw ValueError("icosphere: subdivisions must be >= 0");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh mesh;
    mesh.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                     {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                     {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& v : mesh.vertices) v = normalized(v);
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int round = 0; round < subdivisions; ++round) {
        std::map<std::pair<int, int>, int> midpoint;
        auto midpoint_of = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (const auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            const Vec3& va = mesh.vertices[a];
            const Vec3& vb = mesh.vertices[b];
            mesh.vertices.push_back(
                normalized({(va.x + vb.x) / 2, (va.y + vb.y) / 2, (va.z + vb.z) / 2}));
            const int id = static_cast<int>(mesh.vertices.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> faces;
        faces.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            const int ab = midpoint_of(f[0], f[1]);
            const int bc = midpoint_of(f[1], f[2]);
            const int ca = midpoint_of(f[2], f[0]);
            faces.push_back({f[0], ab, ca});
            faces.push_back({f[1], bc, ab});
            faces.push_back({f[2], ca, bc});
            faces.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(faces);
    }
    validate_mesh(mesh);
    return mesh;
}

Mesh deform_radially(const Mesh& mesh, std::uint64_t seed, double strength) {
    if (strength < 0.0) throw ValueError("deform: strength must be >= 0");
    Rng rng(seed);
    constexpr int kWaves = 3;
    struct Wave {
        Vec3 dir;
        double amplitude, frequency, phase;
    };
    std::vector<Wave> waves;
    for (int k = 0; k < kWaves; ++k) {
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        while (dir.norm() < 1e-6) dir = {rng.normal(), rng.normal(), rng.normal()};
        Wave w;
        w.dir = normalized(dir);
        w.amplitude = strength * (0.05 + 0.07 * rng.uniform());
        w.frequency = 1.0 + 2.0 * rng.uniform();
        w.phase = 2.0 * 3.14159265358979323846 * rng.uniform();
        waves.push_back(w);
    }
    Mesh out = mesh;
    for (Vec3& p : out.vertices) {
        double factor = 1.0;
        for (const Wave& w : waves)
            factor += w.amplitude * std::sin(w.frequency * p.dot(w.dir) + w.phase);
        p = p * factor;
    }
    return out;
}

TrainSample correspondence_sample(const Mesh& mesh, bool center_features) {
    TrainSample s;
    s.graph = one_ring(mesh);
    s.features = xyz_features(mesh, center_features);
    s.targets.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < s.targets.size(); ++i) s.targets[i] = static_cast<int>(i);
    s.noise_scale = local_edge_scale(mesh);
    return s;
}

std::vector<TrainSample> toy_correspondence_samples(const ToyOptions& opt) {
    if (opt.num_deformed < 0) throw ValueError("toy task: num_deformed must be >= 0");
    const Mesh base = icosphere(opt.subdivisions);
    std::vector<TrainSample> samples;
    samples.push_back(correspondence_sample(base, opt.center_features));
    for (int k = 0; k < opt.num_deformed; ++k) {
        const Mesh deformed =
            deform_radially(base, derive_seed(opt.seed, 1 + k), opt.deform_strength);
        samples.push_back(correspondence_sample(deformed, opt.center_features));
    }
    return samples;
}

Mesh toy_reference_mesh(const ToyOptions& opt) { return icosphere(opt.subdivisions); }

} // namespace feast
