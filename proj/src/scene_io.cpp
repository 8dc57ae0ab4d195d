#include "semsplat/scene_io.hpp"

#include <json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts unsupported");

namespace semsplat {

namespace {

// SH DC band constant Y_0^0.
constexpr double kShC0 = 0.2820947918;

constexpr double kMinActivatedScale = 1e-12;
constexpr double kMinOpacity = 1e-12;
constexpr double kMaxOpacity = 1.0 - 1e-12;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct PlyProperty {
    std::string name;
    std::string type;
    std::size_t size = 0;
    std::size_t offset = 0;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
    std::size_t stride = 0;
};

std::size_t ply_type_size(const std::string& type) {
    if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
    if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
    if (type == "int" || type == "int32" || type == "uint" || type == "uint32") return 4;
    if (type == "float" || type == "float32") return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

double read_ply_scalar(const unsigned char* p, const PlyProperty& prop) {
    if (prop.type == "float" || prop.type == "float32") {
        float v;
        std::memcpy(&v, p + prop.offset, sizeof(v));
        return static_cast<double>(v);
    }
    double v;
    std::memcpy(&v, p + prop.offset, sizeof(v));
    return v;
}

} // namespace

void validate_cloud(const GaussianCloud& cloud) {
    const std::size_t n = cloud.size();
    if (n == 0) throw DimensionError("gaussian cloud is empty");
    if (cloud.rotations.size() != n || cloud.scales.size() != n ||
        cloud.opacities.size() != n || cloud.base_colors.size() != n) {
        throw DimensionError("gaussian cloud field sizes disagree");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(cloud.rotations[i].norm() - 1.0) > 1e-6) {
            throw DimensionError("non-unit quaternion at record " + std::to_string(i));
        }
        if (!(cloud.scales[i].minCoeff() > 0.0)) {
            throw DimensionError("non-positive scale at record " + std::to_string(i));
        }
        const double o = cloud.opacities[i];
        if (!(o > 0.0 && o < 1.0)) {
            throw DimensionError("opacity outside (0,1) at record " + std::to_string(i));
        }
    }
}

void validate_camera(const CameraView& cam) {
    if (cam.width < 1 || cam.height < 1) throw DimensionError("camera with empty image plane");
    if (!(cam.near_plane > 0.0 && cam.near_plane < cam.far_plane)) {
        throw DimensionError("camera requires 0 < near < far");
    }
    const Eigen::Matrix3d r = cam.rotation();
    if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw DimensionError("camera rotation is not orthonormal");
    }
}

GaussianCloud load_gaussian_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PLY: " + path);

    std::string line;
    if (!std::getline(in, line) || line != "ply") throw FormatError("missing 'ply' magic: " + path);
    if (!std::getline(in, line) || line != "format binary_little_endian 1.0") {
        throw FormatError("expected binary little-endian PLY: " + path);
    }

    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string keyword;
        ls >> keyword;
        if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
        if (keyword == "element") {
            PlyElement el;
            ls >> el.name >> el.count;
            if (!ls) throw FormatError("bad element line: " + line);
            elements.push_back(std::move(el));
        } else if (keyword == "property") {
            if (elements.empty()) throw FormatError("property before element");
            std::string type;
            ls >> type;
            if (type == "list") throw FormatError("list properties unsupported");
            PlyProperty prop;
            prop.type = type;
            prop.size = ply_type_size(type);
            if (prop.size == 0) throw FormatError("unknown property type: " + type);
            ls >> prop.name;
            if (!ls) throw FormatError("bad property line: " + line);
            prop.offset = elements.back().stride;
            elements.back().stride += prop.size;
            elements.back().properties.push_back(std::move(prop));
        } else {
            throw FormatError("unexpected header keyword: " + keyword);
        }
    }
    if (!in) throw FormatError("header without end_header: " + path);

    const PlyElement* vertex = nullptr;
    for (const auto& el : elements) {
        if (el.name == "vertex") {
            vertex = &el;
            break;
        }
        in.ignore(static_cast<std::streamsize>(el.count * el.stride));
    }
    if (!vertex) throw FormatError("no vertex element: " + path);
    if (vertex->count == 0) throw FormatError("empty scene: PLY has zero vertices");

    static const char* kRequired[] = {"x", "y", "z", "rot_0", "rot_1", "rot_2", "rot_3",
                                      "scale_0", "scale_1", "scale_2", "opacity",
                                      "f_dc_0", "f_dc_1", "f_dc_2"};
    const PlyProperty* fields[std::size(kRequired)] = {};
    for (std::size_t k = 0; k < std::size(kRequired); ++k) {
        for (const auto& prop : vertex->properties) {
            if (prop.name == kRequired[k]) {
                if (prop.type != "float" && prop.type != "float32" &&
                    prop.type != "double" && prop.type != "float64") {
                    throw FormatError(std::string("property '") + kRequired[k] + "' is not float");
                }
                fields[k] = &prop;
                break;
            }
        }
        if (!fields[k]) {
            throw FormatError(std::string("missing required property '") + kRequired[k] + "'");
        }
    }

    std::vector<unsigned char> payload(vertex->count * vertex->stride);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        throw IoError("truncated PLY payload: " + path);
    }

    GaussianCloud cloud;
    cloud.positions.reserve(vertex->count);
    cloud.rotations.reserve(vertex->count);
    cloud.scales.reserve(vertex->count);
    cloud.opacities.reserve(vertex->count);
    cloud.base_colors.reserve(vertex->count);

    for (std::size_t i = 0; i < vertex->count; ++i) {
        const unsigned char* rec = payload.data() + i * vertex->stride;
        double raw[std::size(kRequired)];
        for (std::size_t k = 0; k < std::size(kRequired); ++k) {
            raw[k] = read_ply_scalar(rec, *fields[k]);
            if (!std::isfinite(raw[k])) {
                throw FormatError("non-finite value in record " + std::to_string(i) +
                                  " (property '" + std::string(kRequired[k]) + "')");
            }
        }

        cloud.positions.emplace_back(raw[0], raw[1], raw[2]);

        Eigen::Quaterniond q(raw[3], raw[4], raw[5], raw[6]);   // stored w,x,y,z
        const double norm = q.norm();
        if (norm < 1e-12) {
            throw FormatError("degenerate quaternion in record " + std::to_string(i));
        }
        q.coeffs() /= norm;
        cloud.rotations.push_back(q);

        Eigen::Vector3d scale(std::exp(raw[7]), std::exp(raw[8]), std::exp(raw[9]));
        if (scale.minCoeff() <= kMinActivatedScale) {
            throw FormatError("non-positive activated scale in record " + std::to_string(i));
        }
        cloud.scales.push_back(scale);

        // Extreme logits saturate the logistic in double; clamp keeps the
        // activated value inside (0,1).
        cloud.opacities.push_back(std::clamp(logistic(raw[10]), kMinOpacity, kMaxOpacity));

        Eigen::Vector3d color(raw[11], raw[12], raw[13]);
        color = (kShC0 * color).array() + 0.5;
        cloud.base_colors.push_back(color.cwiseMax(0.0).cwiseMin(1.0));
    }

    validate_cloud(cloud);
    return cloud;
}

void save_gaussian_ply(const std::string& path, const GaussianCloud& cloud) {
    validate_cloud(cloud);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open PLY for writing: " + path);

    out << "ply\n"
        << "format binary_little_endian 1.0\n"
        << "element vertex " << cloud.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n"
        << "property float opacity\n"
        << "property float scale_0\nproperty float scale_1\nproperty float scale_2\n"
        << "property float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n"
        << "end_header\n";

    auto put = [&out](double v) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    };
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        put(cloud.positions[i].x());
        put(cloud.positions[i].y());
        put(cloud.positions[i].z());
        for (int c = 0; c < 3; ++c) put((cloud.base_colors[i][c] - 0.5) / kShC0);
        const double o = cloud.opacities[i];
        put(std::log(o / (1.0 - o)));
        for (int c = 0; c < 3; ++c) put(std::log(cloud.scales[i][c]));
        put(cloud.rotations[i].w());
        put(cloud.rotations[i].x());
        put(cloud.rotations[i].y());
        put(cloud.rotations[i].z());
    }
    if (!out) throw IoError("PLY write failed: " + path);
}

std::vector<CameraView> load_cameras(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open cameras file: " + path);

    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("cameras JSON parse error: ") + e.what());
    }
    if (!doc.is_array()) throw FormatError("cameras file must be a JSON list");

    std::vector<CameraView> cams;
    cams.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& entry = doc[i];
        const std::string where = "cameras entry " + std::to_string(i);
        if (!entry.is_object()) throw FormatError(where + " is not an object");

        auto require_number = [&](const char* key) -> double {
            if (!entry.contains(key) || !entry[key].is_number()) {
                throw FormatError(where + ": missing numeric key '" + key + "'");
            }
            return entry[key].get<double>();
        };

        CameraView cam;
        cam.width = static_cast<int>(require_number("w"));
        cam.height = static_cast<int>(require_number("h"));
        cam.fx = require_number("fl_x");
        cam.fy = require_number("fl_y");
        cam.cx = require_number("cx");
        cam.cy = require_number("cy");
        if (entry.contains("near")) cam.near_plane = require_number("near");
        if (entry.contains("far")) cam.far_plane = require_number("far");
        if (entry.contains("label_path")) cam.label_path = entry["label_path"].get<std::string>();
        if (entry.contains("image_path")) cam.image_path = entry["image_path"].get<std::string>();

        if (!entry.contains("transform") || !entry["transform"].is_array() ||
            entry["transform"].size() != 16) {
            throw FormatError(where + ": 'transform' must be 16 numbers");
        }
        Eigen::Matrix4d t;
        for (int k = 0; k < 16; ++k) t(k / 4, k % 4) = entry["transform"][k].get<double>();

        Eigen::Matrix3d r = t.block<3, 3>(0, 0);
        if (std::abs(r.determinant()) < 1e-6) {
            throw FormatError(where + ": non-invertible pose");
        }
        const double drift =
            (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
        if (drift > 1e-3) {
            throw FormatError(where + ": rotation drift " + std::to_string(drift) +
                              " exceeds 1e-3");
        }
        if (drift > 0.0) {
            // Polar correction: nearest rotation in Frobenius norm.
            Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
            r = svd.matrixU() * svd.matrixV().transpose();
        }
        if (r.determinant() < 0.0) {
            throw FormatError(where + ": pose contains a reflection");
        }

        cam.camera_to_world = Eigen::Matrix4d::Identity();
        cam.camera_to_world.block<3, 3>(0, 0) = r;
        cam.camera_to_world.block<3, 1>(0, 3) = t.block<3, 1>(0, 3);

        try {
            validate_camera(cam);
        } catch (const DimensionError& e) {
            throw FormatError(where + ": " + e.what());
        }
        cams.push_back(std::move(cam));
    }
    return cams;
}

void save_cameras(const std::string& path, const std::vector<CameraView>& cams) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& cam : cams) {
        nlohmann::json entry = {
            {"w", cam.width},   {"h", cam.height}, {"fl_x", cam.fx}, {"fl_y", cam.fy},
            {"cx", cam.cx},     {"cy", cam.cy},    {"near", cam.near_plane},
            {"far", cam.far_plane},
        };
        auto transform = nlohmann::json::array();
        for (int k = 0; k < 16; ++k) transform.push_back(cam.camera_to_world(k / 4, k % 4));
        entry["transform"] = std::move(transform);
        if (!cam.label_path.empty()) entry["label_path"] = cam.label_path;
        if (!cam.image_path.empty()) entry["image_path"] = cam.image_path;
        doc.push_back(std::move(entry));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open cameras file for writing: " + path);
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("cameras write failed: " + path);
}

LabelImage load_label_image(const std::string& path, int num_classes) {
    if (num_classes < 2 || num_classes > 255) {
        throw DimensionError("num_classes must be in [2, 255]");
    }
    const ImageU8 img = read_png(path);
    if (img.channels != 1) {
        throw FormatError("label image must be single-channel: " + path);
    }
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::uint8_t v = img.data[i];
        if (v != kIgnoreLabel && v >= num_classes) {
            throw FormatError("label value " + std::to_string(v) + " out of range (C=" +
                              std::to_string(num_classes) + ") in " + path);
        }
    }
    LabelImage labels;
    labels.width = img.width;
    labels.height = img.height;
    labels.category_ids = img.data;
    return labels;
}

void save_label_image(const std::string& path, const LabelImage& labels) {
    ImageU8 img(labels.width, labels.height, 1);
    img.data = labels.category_ids;
    write_png(path, img);
}

namespace {

constexpr char kStateMagic[4] = {'C', 'S', 'S', 'D'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (static_cast<std::size_t>(in.gcount()) != sizeof(v)) {
        throw IoError("truncated state file: " + path);
    }
}

} // namespace

void save_semantic_state(const std::string& path, const SemanticState& state) {
    if (state.num_gaussians == 0) throw DimensionError("refusing to save empty state (N=0)");
    if (state.num_classes < 2) throw DimensionError("state needs at least 2 classes");
    if (!(state.prior_value > 0.0) || !std::isfinite(state.prior_value)) {
        throw DimensionError("state prior must be positive and finite");
    }
    if (state.background.size() != state.num_classes ||
        state.concentrations.size() != state.num_gaussians * state.num_classes) {
        throw DimensionError("state buffer sizes disagree with N x C");
    }
    for (double b : state.background) {
        if (!(b > 0.0) || !std::isfinite(b)) throw DimensionError("background entries must be > 0");
    }
    for (double a : state.concentrations) {
        if (!std::isfinite(a) || a < state.prior_value) {
            throw DimensionError("concentrations must be finite and >= prior");
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open state file for writing: " + path);
    out.write(kStateMagic, sizeof(kStateMagic));
    write_raw(out, kStateVersion);
    write_raw(out, static_cast<std::uint64_t>(state.num_gaussians));
    write_raw(out, static_cast<std::uint32_t>(state.num_classes));
    write_raw(out, state.prior_value);
    out.write(reinterpret_cast<const char*>(state.background.data()),
              static_cast<std::streamsize>(state.background.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(state.concentrations.data()),
              static_cast<std::streamsize>(state.concentrations.size() * sizeof(double)));
    if (!out) throw IoError("state write failed: " + path);
}

SemanticState load_semantic_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open state file: " + path);

    char magic[4];
    in.read(magic, sizeof(magic));
    if (static_cast<std::size_t>(in.gcount()) != sizeof(magic)) {
        throw IoError("truncated state file: " + path);
    }
    if (std::memcmp(magic, kStateMagic, sizeof(magic)) != 0) {
        throw FormatError("bad state file magic: " + path);
    }
    std::uint32_t version = 0;
    read_raw(in, version, path);
    if (version != kStateVersion) {
        throw FormatError("unsupported state version " + std::to_string(version));
    }

    std::uint64_t n = 0;
    std::uint32_t c = 0;
    SemanticState state;
    read_raw(in, n, path);
    read_raw(in, c, path);
    read_raw(in, state.prior_value, path);
    if (n == 0 || c < 2 || c > (1u << 20)) throw FormatError("implausible state dimensions");
    state.num_gaussians = static_cast<std::size_t>(n);
    state.num_classes = c;

    state.background.resize(c);
    in.read(reinterpret_cast<char*>(state.background.data()),
            static_cast<std::streamsize>(c * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != c * sizeof(double)) {
        throw IoError("truncated state file: " + path);
    }
    state.concentrations.resize(state.num_gaussians * state.num_classes);
    const std::streamsize bytes =
        static_cast<std::streamsize>(state.concentrations.size() * sizeof(double));
    in.read(reinterpret_cast<char*>(state.concentrations.data()), bytes);
    if (in.gcount() != bytes) throw IoError("truncated state file: " + path);
    return state;
}

} // namespace semsplat
