#pragma once

#include <cmath>

namespace cosim {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

    constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

inline constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Unit quaternion stored (x, y, z, w).
struct Quat {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double w = 1.0;

    static constexpr Quat identity() { return {0.0, 0.0, 0.0, 1.0}; }

    // Rotation by `yaw` radians about +z.
    static Quat from_yaw(double yaw) { return {0.0, 0.0, std::sin(yaw / 2.0), std::cos(yaw / 2.0)}; }

    double norm() const { return std::sqrt(x * x + y * y + z * z + w * w); }

    friend constexpr bool operator==(const Quat&, const Quat&) = default;
};

}  // namespace cosim
