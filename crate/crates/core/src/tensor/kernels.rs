//! Slice-level numeric kernels shared by the tape ops and the plain
//! (tape-free) helpers.

use super::Float;

/// Strided matrix product `c = alpha * a * b + beta * c` with `a: m×k`,
/// `b: k×n`, `c: m×n`. Strides are `(row, column)` pairs, so a transposed
/// operand is expressed by swapping its strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Float>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    a_strides: (usize, usize),
    b: &[T],
    b_strides: (usize, usize),
    beta: T,
    c: &mut [T],
    c_strides: (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        (rows.saturating_sub(1)) * rs + (cols.saturating_sub(1)) * cs
    };
    if k > 0 {
        assert!(last(m, k, a_strides) < a.len(), "gemm: lhs out of bounds");
        assert!(last(k, n, b_strides) < b.len(), "gemm: rhs out of bounds");
    }
    assert!(last(m, n, c_strides) < c.len(), "gemm: output out of bounds");
    // SAFETY: every index reachable from the sizes and strides was checked
    // against the slice lengths above.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_strides.0 as isize,
            c_strides.1 as isize,
        )
    }
}

/// Lays out every 3×3 zero-padded neighborhood of a `c×h×w` input as a
/// column: the result is `(c·9) × (h·w)`.
pub(crate) fn im2col3x3<T: Float>(input: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut cols = vec![T::zero(); c * 9 * hw];
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    // dst[x] = src[x + kx - 1] where in range
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col3x3`]: scatters column gradients back onto the input.
pub(crate) fn col2im3x3<T: Float>(cols: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); c * hw];
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ch * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match kx {
                        0 => add_into(&mut dst[..w - 1], &src[1..]),
                        1 => add_into(dst, src),
                        _ => add_into(&mut dst[1..], &src[..w - 1]),
                    }
                }
            }
        }
    }
    out
}

fn add_into<T: Float>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// 3×3 cross-correlation with zero padding 1. Returns the output
/// (`c_out × h × w`) and the im2col buffer it was computed from.
pub fn conv2d_forward<T: Float>(
    input: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    c_out: usize,
    bias: Option<&[T]>,
) -> (Vec<T>, Vec<T>) {
    let hw = h * w;
    let cols = im2col3x3(input, c_in, h, w);
    let mut out = vec![T::zero(); c_out * hw];
    if let Some(b) = bias {
        for (row, &bv) in out.chunks_exact_mut(hw).zip(b) {
            row.fill(bv);
        }
    }
    let beta = if bias.is_some() { T::one() } else { T::zero() };
    gemm(
        c_out,
        c_in * 9,
        hw,
        T::one(),
        kernel,
        (c_in * 9, 1),
        &cols,
        (hw, 1),
        beta,
        &mut out,
        (hw, 1),
    );
    (out, cols)
}

/// Edge-clamped 3×3 neighborhood gather: channel `c·9 + j` of the output is
/// channel `c` of the input read at neighbor `j` (row-major over the 3×3
/// window).
pub fn unfold3x3<T: Float>(input: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); c * 9 * hw];
    for ch in 0..c {
        let plane = &input[ch * hw..(ch + 1) * hw];
        for j in 0..9 {
            let (dy, dx) = (j as isize / 3 - 1, j as isize % 3 - 1);
            let dst = &mut out[(ch * 9 + j) * hw..][..hw];
            for y in 0..h {
                let sy = clamp_index(y as isize + dy, h);
                for x in 0..w {
                    let sx = clamp_index(x as isize + dx, w);
                    dst[y * w + x] = plane[sy * w + sx];
                }
            }
        }
    }
    out
}

/// Adjoint of [`unfold3x3`].
pub(crate) fn fold3x3<T: Float>(grad: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); c * hw];
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for j in 0..9 {
            let (dy, dx) = (j as isize / 3 - 1, j as isize % 3 - 1);
            let src = &grad[(ch * 9 + j) * hw..][..hw];
            for y in 0..h {
                let sy = clamp_index(y as isize + dy, h);
                for x in 0..w {
                    let sx = clamp_index(x as isize + dx, w);
                    plane[sy * w + sx] += src[y * w + x];
                }
            }
        }
    }
    out
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}
