#pragma once

// Exact 2x2 space-to-depth "latent" transform.  Pixels are rearranged, never
// rescaled, so encode/decode round-trips are bit-exact -- a property the
// first-frame conditioning path depends on.
//
// Channel layout: output channel c*4 + (dy*2 + dx) holds input channel c at
// subpixel offset (dy, dx).

#include "tensor.hpp"

namespace vdiff {

// [N,C,H,W] -> [N,4C,H/2,W/2]
template <class T>
Tensor<T> encode_video(const Tensor<T>& pixel) {
    check_arg(pixel.rank() == 4, "encode_video: rank-4 input required");
    const i64 N = pixel.dim(0), C = pixel.dim(1), H = pixel.dim(2), W = pixel.dim(3);
    check_arg(H % 2 == 0 && W % 2 == 0, "encode_video: H and W must be even");
    Tensor<T> out({N, 4 * C, H / 2, W / 2});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 dy = 0; dy < 2; ++dy)
                for (i64 dx = 0; dx < 2; ++dx)
                    for (i64 y = 0; y < H / 2; ++y)
                        for (i64 x = 0; x < W / 2; ++x)
                            out.at4(n, c * 4 + dy * 2 + dx, y, x) =
                                pixel.at4(n, c, 2 * y + dy, 2 * x + dx);
    return out;
}

// [N,4C,H',W'] -> [N,C,2H',2W']
template <class T>
Tensor<T> decode_video(const Tensor<T>& latent) {
    check_arg(latent.rank() == 4, "decode_video: rank-4 input required");
    const i64 N = latent.dim(0), C4 = latent.dim(1), Hh = latent.dim(2), Wh = latent.dim(3);
    check_arg(C4 % 4 == 0, "decode_video: channel count must be a multiple of 4");
    const i64 C = C4 / 4;
    Tensor<T> out({N, C, 2 * Hh, 2 * Wh});
    for (i64 n = 0; n < N; ++n)
        for (i64 c = 0; c < C; ++c)
            for (i64 dy = 0; dy < 2; ++dy)
                for (i64 dx = 0; dx < 2; ++dx)
                    for (i64 y = 0; y < Hh; ++y)
                        for (i64 x = 0; x < Wh; ++x)
                            out.at4(n, c, 2 * y + dy, 2 * x + dx) =
                                latent.at4(n, c * 4 + dy * 2 + dx, y, x);
    return out;
}

// single-frame convenience: [C,H,W] <-> [4C,H/2,W/2]
template <class T>
Tensor<T> encode_frame(const Tensor<T>& frame) {
    check_arg(frame.rank() == 3, "encode_frame: rank-3 input required");
    Tensor<T> v = frame.reshaped({1, frame.dim(0), frame.dim(1), frame.dim(2)});
    Tensor<T> e = encode_video(v);
    return e.reshaped({e.dim(1), e.dim(2), e.dim(3)});
}

template <class T>
Tensor<T> decode_frame(const Tensor<T>& latent) {
    check_arg(latent.rank() == 3, "decode_frame: rank-3 input required");
    Tensor<T> v = latent.reshaped({1, latent.dim(0), latent.dim(1), latent.dim(2)});
    Tensor<T> d = decode_video(v);
    return d.reshaped({d.dim(1), d.dim(2), d.dim(3)});
}

}  // namespace vdiff
