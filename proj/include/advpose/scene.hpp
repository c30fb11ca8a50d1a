#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "advpose/error.hpp"
#include "advpose/linalg.hpp"
#include "advpose/pose.hpp"
#include "advpose/raster.hpp"

namespace advpose {

// Flat-shaded triangle mesh. base_normal is the face direction that rests
// on the ground when the object sits in its canonical pose; the naturalness
// heuristic compares its rotated image against world-down.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<std::uint8_t, 3>> face_colors;
    Vec3 base_normal{0.0, 0.0, -1.0};

    void validate() const {
        if (faces.empty()) throw InvalidInput("mesh needs at least one face");
        if (face_colors.size() != faces.size())
            throw InvalidInput("mesh needs one color per face");
        for (const auto& f : faces)
            for (int idx : f)
                if (idx < 0 || idx >= static_cast<int>(vertices.size()))
                    throw InvalidInput("face index out of range: " + std::to_string(idx));
        if (std::abs(norm(base_normal) - 1.0) > 1e-9)
            throw InvalidInput("base_normal must be unit length");
    }

    // Pivot for rotation/scaling: axis-aligned bounding-box centroid.
    Vec3 aabb_centroid() const {
        Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        for (const Vec3& v : vertices)
            for (int i = 0; i < 3; ++i) {
                lo[i] = std::min(lo[i], v[i]);
                hi[i] = std::max(hi[i], v[i]);
            }
        return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};
    }
};

struct Camera {
    Vec3 position{0.0, -10.0, 0.0};
    Vec3 look_at{0.0, 0.0, 0.0};
    Vec3 up{0.0, 0.0, 1.0};
    double fov_deg = 45.0;    // vertical field of view
    int width = 128;
    int height = 128;

    void validate() const {
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw InvalidInput("camera fov must be in (0, 180)");
        if (width <= 0 || height <= 0) throw InvalidInput("camera output size must be positive");
        if (norm(look_at - position) == 0.0)
            throw InvalidInput("camera position must differ from look_at");
    }
};

struct Scene {
    Mesh mesh;
    Raster background;
    Camera camera;
};

struct RenderStats {
    std::size_t covered_pixels = 0;
    bool fully_clipped = false;    // nothing in front of the near plane
};

namespace detail {

struct CameraFrame {
    Vec3 origin, right, up, forward;
    double tan_half, aspect;
    int width, height;
};

inline CameraFrame make_frame(const Camera& cam) {
    cam.validate();
    CameraFrame f;
    f.forward = normalized(cam.look_at - cam.position);
    Vec3 side = cross(f.forward, cam.up);
    if (norm(side) == 0.0) throw InvalidInput("camera up vector is parallel to the view direction");
    f.right = normalized(side);
    f.up = cross(f.right, f.forward);
    f.origin = cam.position;
    f.tan_half = std::tan(0.5 * cam.fov_deg * kDegToRad);
    f.aspect = static_cast<double>(cam.width) / cam.height;
    f.width = cam.width;
    f.height = cam.height;
    return f;
}

// x/y in the camera plane plus positive forward depth.
struct CamPoint {
    double x, y, w;
};

inline CamPoint to_camera(const CameraFrame& f, const Vec3& p) {
    Vec3 d = p - f.origin;
    return {dot(d, f.right), dot(d, f.up), dot(d, f.forward)};
}

struct ScreenPoint {
    double x, y, depth;
};

inline ScreenPoint project(const CameraFrame& f, const CamPoint& c) {
    double xn = (c.x / c.w) / (f.tan_half * f.aspect);
    double yn = (c.y / c.w) / f.tan_half;
    return {(xn + 1.0) * 0.5 * f.width, (1.0 - yn) * 0.5 * f.height, c.w};
}

constexpr double kNearPlane = 1e-3;

// Clip a triangle against w >= near; yields 0..4 vertices.
inline int clip_near(const CamPoint in[3], CamPoint out[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const CamPoint& a = in[i];
        const CamPoint& b = in[(i + 1) % 3];
        bool ain = a.w >= kNearPlane;
        bool bin = b.w >= kNearPlane;
        if (ain) out[n++] = a;
        if (ain != bin) {
            double t = (kNearPlane - a.w) / (b.w - a.w);
            out[n++] = {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), kNearPlane};
        }
    }
    return n;
}

struct FrameBuffers {
    int width = 0, height = 0;
    std::vector<std::int32_t> face;    // -1 where background
    std::vector<double> depth;

    FrameBuffers(int w, int h)
        : width(w),
          height(h),
          face(static_cast<std::size_t>(w) * h, -1),
          depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}
};

inline double edge(const ScreenPoint& a, const ScreenPoint& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

inline void raster_triangle(FrameBuffers& fb, ScreenPoint p0, ScreenPoint p1, ScreenPoint p2,
                            std::int32_t face_id) {
    double area2 = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
    if (area2 == 0.0) return;
    if (area2 < 0.0) {
        std::swap(p1, p2);
        area2 = -area2;
    }

    int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x, p1.x, p2.x}) - 0.5)));
    int x1 = std::min(fb.width - 1, static_cast<int>(std::ceil(std::max({p0.x, p1.x, p2.x}))));
    int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y, p1.y, p2.y}) - 0.5)));
    int y1 = std::min(fb.height - 1, static_cast<int>(std::ceil(std::max({p0.y, p1.y, p2.y}))));

    for (int y = y0; y <= y1; ++y) {
        double py = y + 0.5;
        for (int x = x0; x <= x1; ++x) {
            double px = x + 0.5;
            double e0 = edge(p1, p2, px, py);
            double e1 = edge(p2, p0, px, py);
            double e2 = edge(p0, p1, px, py);
            if (e0 < 0.0 || e1 < 0.0 || e2 < 0.0) continue;
            double d = (e0 * p0.depth + e1 * p1.depth + e2 * p2.depth) / area2;
            std::size_t at = static_cast<std::size_t>(y) * fb.width + x;
            // Strict less: on exact ties the earlier face stays.
            if (d < fb.depth[at]) {
                fb.depth[at] = d;
                fb.face[at] = face_id;
            }
        }
    }
}

inline FrameBuffers rasterize(const Mesh& mesh, const std::vector<Vec3>& world_vertices,
                              const Camera& camera) {
    CameraFrame frame = make_frame(camera);
    FrameBuffers fb(camera.width, camera.height);

    std::vector<CamPoint> cam_pts;
    cam_pts.reserve(world_vertices.size());
    for (const Vec3& v : world_vertices) cam_pts.push_back(to_camera(frame, v));

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        CamPoint tri[3] = {cam_pts[mesh.faces[f][0]], cam_pts[mesh.faces[f][1]],
                           cam_pts[mesh.faces[f][2]]};
        CamPoint clipped[4];
        int n = clip_near(tri, clipped);
        if (n < 3) continue;
        ScreenPoint sp[4];
        for (int i = 0; i < n; ++i) sp[i] = project(frame, clipped[i]);
        for (int i = 1; i + 1 < n; ++i)
            raster_triangle(fb, sp[0], sp[i], sp[i + 1], static_cast<std::int32_t>(f));
    }
    return fb;
}

}  // namespace detail

inline std::vector<Vec3> transformed_vertices(const Mesh& mesh, const PoseParams& pose) {
    RigidTransform t = to_rigid_transform(pose);
    return apply_transform(t, mesh.vertices, mesh.aabb_centroid());
}

// Deterministic flat-shaded z-buffered render composited over the
// background. Identical inputs give byte-identical output.
inline Raster render(const Mesh& mesh, const PoseParams& pose, const Raster& background,
                     const Camera& camera, RenderStats* stats = nullptr) {
    mesh.validate();
    pose.validate();
    if (background.width != camera.width || background.height != camera.height)
        throw InvalidInput("background size must match camera output size");

    detail::FrameBuffers fb = detail::rasterize(mesh, transformed_vertices(mesh, pose), camera);

    Raster out = background;
    std::size_t covered = 0;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            std::int32_t f = fb.face[static_cast<std::size_t>(y) * out.width + x];
            if (f < 0) continue;
            const auto& c = mesh.face_colors[f];
            std::uint8_t* px = out.at(x, y);
            px[0] = c[0];
            px[1] = c[1];
            px[2] = c[2];
            ++covered;
        }
    }
    if (stats) {
        stats->covered_pixels = covered;
        stats->fully_clipped = covered == 0;
    }
    return out;
}

// Coverage mask consistent with render(): 1 exactly where render would
// write a foreground pixel.
inline Mask foreground_mask(const Mesh& mesh, const PoseParams& pose, const Camera& camera) {
    mesh.validate();
    pose.validate();
    detail::FrameBuffers fb = detail::rasterize(mesh, transformed_vertices(mesh, pose), camera);
    Mask mask(camera.width, camera.height);
    for (std::size_t i = 0; i < fb.face.size(); ++i) mask.bits[i] = fb.face[i] >= 0 ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// Scene file format: a line-oriented text document. '#' starts a comment,
// blank lines are ignored. Sections:
//
//   [vertices]      one "x y z" per line
//   [faces]         one "i j k r g b" per line (vertex indices + RGB8 color)
//   [base_normal]   one "nx ny nz" line, unit length
//   [camera]        key = value lines: position/look_at/up (3 numbers),
//                   fov (degrees), size (width height)
//   [background]    either "flat = r g b" or "image = path-to-ADPR-file"
//                   (path resolved relative to the scene file)
//
// All five sections are required.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double parse_num(const std::string& tok, int line_no, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + tok + "'");
    }
}

}  // namespace detail

inline Scene load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open scene file: " + path);

    Scene scene;
    bool have_vertices = false, have_faces = false, have_normal = false, have_camera = false,
         have_background = false;
    bool bg_flat = false;
    std::array<std::uint8_t, 3> bg_color{0, 0, 0};
    std::string bg_image;

    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::vector<std::string> toks = detail::split_ws(line);
        if (toks.empty()) continue;

        if (toks[0].front() == '[') {
            std::string raw;
            for (const auto& t : toks) raw += t;
            if (raw.size() < 2 || raw.back() != ']')
                throw ParseError("line " + std::to_string(line_no) + ": malformed section header");
            section = raw.substr(1, raw.size() - 2);
            if (section == "vertices") have_vertices = true;
            else if (section == "faces") have_faces = true;
            else if (section == "base_normal") have_normal = true;
            else if (section == "camera") have_camera = true;
            else if (section == "background") have_background = true;
            else
                throw ParseError("line " + std::to_string(line_no) + ": unknown section [" +
                                 section + "]");
            continue;
        }
        if (section.empty())
            throw ParseError("line " + std::to_string(line_no) + ": content before any section");

        if (section == "vertices") {
            if (toks.size() != 3)
                throw ParseError("line " + std::to_string(line_no) + ": vertex needs 3 numbers");
            scene.mesh.vertices.push_back({detail::parse_num(toks[0], line_no, "vertex x"),
                                           detail::parse_num(toks[1], line_no, "vertex y"),
                                           detail::parse_num(toks[2], line_no, "vertex z")});
        } else if (section == "faces") {
            if (toks.size() != 6)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": face needs 'i j k r g b' (6 fields)");
            std::array<int, 3> idx;
            for (int i = 0; i < 3; ++i)
                idx[i] = static_cast<int>(detail::parse_num(toks[i], line_no, "face index"));
            std::array<std::uint8_t, 3> col;
            for (int i = 0; i < 3; ++i) {
                double c = detail::parse_num(toks[3 + i], line_no, "face color");
                if (c < 0 || c > 255)
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": face color out of [0, 255]");
                col[i] = static_cast<std::uint8_t>(c);
            }
            scene.mesh.faces.push_back(idx);
            scene.mesh.face_colors.push_back(col);
        } else if (section == "base_normal") {
            if (toks.size() != 3)
                throw ParseError("line " + std::to_string(line_no) + ": base_normal needs 3 numbers");
            scene.mesh.base_normal = {detail::parse_num(toks[0], line_no, "normal x"),
                                      detail::parse_num(toks[1], line_no, "normal y"),
                                      detail::parse_num(toks[2], line_no, "normal z")};
        } else if (section == "camera") {
            if (toks.size() < 3 || toks[1] != "=")
                throw ParseError("line " + std::to_string(line_no) +
                                 ": camera lines use 'key = values'");
            const std::string& key = toks[0];
            std::vector<double> vals;
            for (std::size_t i = 2; i < toks.size(); ++i)
                vals.push_back(detail::parse_num(toks[i], line_no, "camera " + key));
            auto need = [&](std::size_t n) {
                if (vals.size() != n)
                    throw ParseError("line " + std::to_string(line_no) + ": camera " + key +
                                     " needs " + std::to_string(n) + " numbers");
            };
            if (key == "position") { need(3); scene.camera.position = {vals[0], vals[1], vals[2]}; }
            else if (key == "look_at") { need(3); scene.camera.look_at = {vals[0], vals[1], vals[2]}; }
            else if (key == "up") { need(3); scene.camera.up = {vals[0], vals[1], vals[2]}; }
            else if (key == "fov") { need(1); scene.camera.fov_deg = vals[0]; }
            else if (key == "size") {
                need(2);
                scene.camera.width = static_cast<int>(vals[0]);
                scene.camera.height = static_cast<int>(vals[1]);
            } else {
                throw ParseError("line " + std::to_string(line_no) + ": unknown camera key '" +
                                 key + "'");
            }
        } else if (section == "background") {
            if (toks.size() < 3 || toks[1] != "=")
                throw ParseError("line " + std::to_string(line_no) +
                                 ": background lines use 'key = values'");
            if (toks[0] == "flat") {
                if (toks.size() != 5)
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": background flat needs 3 numbers");
                for (int i = 0; i < 3; ++i) {
                    double c = detail::parse_num(toks[2 + i], line_no, "background color");
                    if (c < 0 || c > 255)
                        throw ParseError("line " + std::to_string(line_no) +
                                         ": background color out of [0, 255]");
                    bg_color[i] = static_cast<std::uint8_t>(c);
                }
                bg_flat = true;
            } else if (toks[0] == "image") {
                bg_image = line.substr(line.find('=') + 1);
                // Trim surrounding whitespace from the raw path.
                auto b = bg_image.find_first_not_of(" \t");
                auto e = bg_image.find_last_not_of(" \t");
                if (b == std::string::npos)
                    throw ParseError("line " + std::to_string(line_no) + ": empty background path");
                bg_image = bg_image.substr(b, e - b + 1);
            } else {
                throw ParseError("line " + std::to_string(line_no) +
                                 ": background key must be 'flat' or 'image'");
            }
        }
    }

    if (!have_vertices) throw ParseError(path + ": missing [vertices] section");
    if (!have_faces) throw ParseError(path + ": missing [faces] section");
    if (!have_normal) throw ParseError(path + ": missing [base_normal] section");
    if (!have_camera) throw ParseError(path + ": missing [camera] section");
    if (!have_background) throw ParseError(path + ": missing [background] section");

    scene.mesh.validate();
    scene.camera.validate();

    if (bg_flat) {
        scene.background =
            Raster(scene.camera.width, scene.camera.height, bg_color[0], bg_color[1], bg_color[2]);
    } else {
        std::filesystem::path img = bg_image;
        if (img.is_relative()) img = std::filesystem::path(path).parent_path() / img;
        scene.background = adpr::load(img.string());
        if (scene.background.width != scene.camera.width ||
            scene.background.height != scene.camera.height)
            throw ParseError(path + ": background image size does not match camera size");
    }
    return scene;
}

inline void save_scene(const Scene& scene, const std::string& path,
                       const std::string& background_image_path = "") {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    f.precision(17);
    f << "[vertices]\n";
    for (const Vec3& v : scene.mesh.vertices) f << v[0] << " " << v[1] << " " << v[2] << "\n";
    f << "\n[faces]\n";
    for (std::size_t i = 0; i < scene.mesh.faces.size(); ++i) {
        const auto& fc = scene.mesh.faces[i];
        const auto& c = scene.mesh.face_colors[i];
        f << fc[0] << " " << fc[1] << " " << fc[2] << " " << int(c[0]) << " " << int(c[1]) << " "
          << int(c[2]) << "\n";
    }
    const Vec3& n = scene.mesh.base_normal;
    f << "\n[base_normal]\n" << n[0] << " " << n[1] << " " << n[2] << "\n";
    const Camera& cam = scene.camera;
    f << "\n[camera]\n";
    f << "position = " << cam.position[0] << " " << cam.position[1] << " " << cam.position[2] << "\n";
    f << "look_at = " << cam.look_at[0] << " " << cam.look_at[1] << " " << cam.look_at[2] << "\n";
    f << "up = " << cam.up[0] << " " << cam.up[1] << " " << cam.up[2] << "\n";
    f << "fov = " << cam.fov_deg << "\n";
    f << "size = " << cam.width << " " << cam.height << "\n";
    f << "\n[background]\n";
    if (background_image_path.empty()) {
        // Flat background: written as the top-left pixel's color.
        const std::uint8_t* px = scene.background.pixels.data();
        f << "flat = " << int(px[0]) << " " << int(px[1]) << " " << int(px[2]) << "\n";
    } else {
        adpr::save(scene.background,
                   (std::filesystem::path(path).parent_path() / background_image_path).string());
        f << "image = " << background_image_path << "\n";
    }
    if (!f) throw Error("write failed: " + path);
}

}  // namespace advpose
