#pragma once

// Frame-sequence IO: binary PPM (P6) frames named frame_0000.ppm, ... plus a
// manifest.txt with frame count, fps, and value range.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "tensor.hpp"

namespace vdiff {

struct VideoManifest {
    i64 frames = 0;
    i64 fps = 8;
    std::string range = "unit";  // values in [0, 1]
};

template <class T>
void write_ppm(const std::string& path, const Tensor<T>& frame) {
    check_arg(frame.rank() == 3 && frame.dim(0) == 3, "write_ppm: frame must be [3,H,W]");
    const i64 h = frame.dim(1), w = frame.dim(2);
    std::ofstream out(path, std::ios::binary);
    check_runtime(out.good(), "write_ppm: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(size_t(w) * 3);
    for (i64 y = 0; y < h; ++y) {
        for (i64 x = 0; x < w; ++x)
            for (i64 c = 0; c < 3; ++c) {
                const double v = std::min(1.0, std::max(0.0, double(frame.at3(c, y, x))));
                row[size_t(x * 3 + c)] = (unsigned char)(std::lround(v * 255.0));
            }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
    check_runtime(out.good(), "write_ppm: write failed for " + path);
}

template <class T>
Tensor<T> read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check_runtime(in.good(), "read_ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    check_runtime(magic == "P6", "read_ppm: not a P6 file: " + path);
    i64 w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    check_runtime(in.good() && w > 0 && h > 0, "read_ppm: malformed header in " + path);
    check_runtime(maxval == 255, "read_ppm: only maxval 255 is supported");
    in.get();  // the single whitespace byte after the header
    std::vector<unsigned char> bytes(size_t(w) * size_t(h) * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    check_runtime(in.gcount() == std::streamsize(bytes.size()),
                  "read_ppm: truncated pixel data in " + path);
    Tensor<T> frame({3, h, w});
    for (i64 y = 0; y < h; ++y)
        for (i64 x = 0; x < w; ++x)
            for (i64 c = 0; c < 3; ++c)
                frame.at3(c, y, x) = T(double(bytes[size_t((y * w + x) * 3 + c)]) / 255.0);
    return frame;
}

inline std::string frame_filename(i64 index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04lld.ppm", (long long)index);
    return buf;
}

inline void write_manifest(const std::string& path, const VideoManifest& m) {
    std::ofstream out(path);
    check_runtime(out.good(), "write_manifest: cannot open " + path);
    out << "frames = " << m.frames << "\n";
    out << "fps = " << m.fps << "\n";
    out << "range = " << m.range << "\n";
}

inline VideoManifest read_manifest(const std::string& path) {
    Config cfg = Config::from_file(path);
    VideoManifest m;
    m.frames = cfg.get_int("frames", -1);
    check_runtime(m.frames >= 0, "read_manifest: missing frames in " + path);
    m.fps = cfg.get_int("fps", 8);
    m.range = cfg.get_str("range", "unit");
    return m;
}

// video is [N, 3, H, W] with values in [0, 1]
template <class T>
void write_video(const std::string& dir, const Tensor<T>& video, i64 fps = 8) {
    check_arg(video.rank() == 4 && video.dim(1) == 3, "write_video: video must be [N,3,H,W]");
    std::filesystem::create_directories(dir);
    const i64 n = video.dim(0), h = video.dim(2), w = video.dim(3);
    const i64 per = 3 * h * w;
    for (i64 f = 0; f < n; ++f) {
        Tensor<T> frame({3, h, w});
        std::copy(video.data() + f * per, video.data() + (f + 1) * per, frame.data());
        write_ppm(dir + "/" + frame_filename(f), frame);
    }
    write_manifest(dir + "/manifest.txt", {n, fps, "unit"});
}

template <class T>
std::pair<Tensor<T>, VideoManifest> read_video(const std::string& dir) {
    const VideoManifest m = read_manifest(dir + "/manifest.txt");
    check_runtime(m.frames >= 1, "read_video: manifest lists no frames");
    Tensor<T> first = read_ppm<T>(dir + "/" + frame_filename(0));
    const i64 h = first.dim(1), w = first.dim(2);
    Tensor<T> video({m.frames, 3, h, w});
    const i64 per = 3 * h * w;
    std::copy(first.data(), first.data() + per, video.data());
    for (i64 f = 1; f < m.frames; ++f) {
        Tensor<T> frame = read_ppm<T>(dir + "/" + frame_filename(f));
        check_runtime(frame.dim(1) == h && frame.dim(2) == w,
                      "read_video: frame size mismatch at index " + std::to_string(f));
        std::copy(frame.data(), frame.data() + per, video.data() + f * per);
    }
    return {std::move(video), m};
}

}  // namespace vdiff
