#include "feast/pointcloud.hpp"

#include <fstream>
#include <sstream>

#include "feast/errors.hpp"

namespace feast {

LabeledPointCloud load_labeled_points(std::istream& points_in, std::istream& labels_in) {
    LabeledPointCloud cloud;
    std::string line;
    long lineno = 0;
    while (std::getline(points_in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        Vec3 p;
        if (!(ls >> p.x >> p.y >> p.z))
            throw ParseError("points: bad line " + std::to_string(lineno) + ": '" + line + "'");
        cloud.points.push_back(p);
    }

    lineno = 0;
    while (std::getline(labels_in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        int label = 0;
        if (!(ls >> label))
            throw ParseError("labels: bad line " + std::to_string(lineno) + ": '" + line + "'");
        cloud.labels.push_back(label);
    }

    if (cloud.points.size() != cloud.labels.size())
        throw ParseError("labeled points: " + std::to_string(cloud.points.size()) + " points vs " +
                         std::to_string(cloud.labels.size()) + " labels");
    return cloud;
}

LabeledPointCloud load_labeled_points(const std::string& points_path, const std::string& labels_path) {
    std::ifstream pin(points_path);
    if (!pin) throw IoError("cannot open '" + points_path + "'");
    std::ifstream lin(labels_path);
    if (!lin) throw IoError("cannot open '" + labels_path + "'");
    return load_labeled_points(pin, lin);
}

Matrix xyz_features(const LabeledPointCloud& cloud, bool center) {
    const int n = cloud.size();
    Vec3 c{0, 0, 0};
    if (center && n > 0) {
        for (const auto& p : cloud.points) c = c + p;
        c = c * (1.0 / n);
    }
    Matrix X(n, 3);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = cloud.points[i].x - c.x;
        X(i, 1) = cloud.points[i].y - c.y;
        X(i, 2) = cloud.points[i].z - c.z;
    }
    return X;
}

} // namespace feast
