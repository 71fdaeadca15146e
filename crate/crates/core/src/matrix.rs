//! Dense column-major storage and in-place rectangular views into it.
//!
//! A [`Matrix`] owns one buffer. [`TileView`] and [`TileViewMut`] are windows
//! into that buffer described by an offset, a shape and the buffer's column
//! stride. Mutable views can only be produced by splitting a parent view into
//! disjoint rectangles, so two live `TileViewMut`s never alias.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Index, IndexMut};

/// A rectangle of a backing buffer, in element indices of that buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub row_off: usize,
    pub col_off: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Window {
    pub const fn new(row_off: usize, col_off: usize, rows: usize, cols: usize) -> Self {
        Self {
            row_off,
            col_off,
            rows,
            cols,
        }
    }

    /// Square window on the diagonal.
    pub const fn diagonal(offset: usize, n: usize) -> Self {
        Self::new(offset, offset, n, n)
    }

    pub fn intersects(&self, other: &Window) -> bool {
        let rows = self.row_off < other.row_off + other.rows && other.row_off < self.row_off + self.rows;
        let cols = self.col_off < other.col_off + other.cols && other.col_off < self.col_off + self.cols;
        rows && cols && self.rows > 0 && self.cols > 0 && other.rows > 0 && other.cols > 0
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rows {}..{}, cols {}..{}",
            self.row_off,
            self.row_off + self.rows,
            self.col_off,
            self.col_off + self.cols
        )
    }
}

/// Owned dense matrix, column-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices. Panics if the rows are ragged.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    /// Wraps a column-major buffer.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn view(&self) -> TileView<'_> {
        TileView {
            ptr: self.data.as_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.rows.max(1),
            row_off: 0,
            col_off: 0,
            _marker: PhantomData,
        }
    }

    pub fn view_mut(&mut self) -> TileViewMut<'_> {
        TileViewMut {
            ptr: self.data.as_mut_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.rows.max(1),
            row_off: 0,
            col_off: 0,
            _marker: PhantomData,
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Copy with the strictly upper triangle zeroed.
    pub fn lower_triangle(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| if i >= j { self[(i, j)] } else { 0.0 })
    }

    /// Copies the lower triangle onto the upper one.
    pub fn symmetrize_from_lower(&mut self) {
        assert!(self.is_square());
        for j in 0..self.cols {
            for i in j + 1..self.rows {
                self[(j, i)] = self[(i, j)];
            }
        }
    }

    /// `self * other^T`, plain `f64` arithmetic.
    pub fn mul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for l in 0..self.cols {
            for j in 0..other.rows {
                let b = other[(j, l)];
                if b == 0.0 {
                    continue;
                }
                let a = &self.data[l * self.rows..(l + 1) * self.rows];
                let c = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (ci, &ai) in c.iter_mut().zip(a) {
                    *ci += ai * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.view().frobenius_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.view().max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest magnitude strictly below the diagonal.
    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.cols {
            for i in j + 1..self.rows {
                m = m.max(self[(i, j)].abs());
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i + j * self.rows]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<f64> = (0..self.cols).map(|j| self[(i, j)]).collect();
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// Read-only window into a column-major buffer.
#[derive(Clone, Copy)]
pub struct TileView<'a> {
    ptr: *const f64,
    rows: usize,
    cols: usize,
    ld: usize,
    row_off: usize,
    col_off: usize,
    _marker: PhantomData<&'a [f64]>,
}

/// Mutable window into a column-major buffer.
pub struct TileViewMut<'a> {
    ptr: *mut f64,
    rows: usize,
    cols: usize,
    ld: usize,
    row_off: usize,
    col_off: usize,
    _marker: PhantomData<&'a mut [f64]>,
}

// SAFETY: the views behave like `&[f64]` / `&mut [f64]` over their rectangle.
unsafe impl Send for TileView<'_> {}
unsafe impl Sync for TileView<'_> {}
unsafe impl Send for TileViewMut<'_> {}
unsafe impl Sync for TileViewMut<'_> {}

macro_rules! shared_view_methods {
    () => {
        pub fn rows(&self) -> usize {
            self.rows
        }

        pub fn cols(&self) -> usize {
            self.cols
        }

        /// Column stride of the backing buffer.
        pub fn leading_dim(&self) -> usize {
            self.ld
        }

        /// Row offset of this window in the root buffer.
        pub fn row_off(&self) -> usize {
            self.row_off
        }

        pub fn col_off(&self) -> usize {
            self.col_off
        }

        pub fn window(&self) -> Window {
            Window::new(self.row_off, self.col_off, self.rows, self.cols)
        }

        pub fn is_square(&self) -> bool {
            self.rows == self.cols
        }

        #[inline]
        pub fn get(&self, i: usize, j: usize) -> f64 {
            assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
            // SAFETY: bounds checked above.
            unsafe { *self.ptr.add(i + j * self.ld) }
        }
    };
}

impl<'a> TileView<'a> {
    shared_view_methods!();

    /// Column `j` as a contiguous slice.
    #[inline]
    pub fn col(&self, j: usize) -> &'a [f64] {
        assert!(j < self.cols, "column {j} out of bounds");
        // SAFETY: the window's column j spans `rows` contiguous elements.
        unsafe { std::slice::from_raw_parts(self.ptr.add(j * self.ld), self.rows) }
    }

    pub fn submatrix(&self, r: usize, c: usize, rows: usize, cols: usize) -> TileView<'a> {
        assert!(r + rows <= self.rows && c + cols <= self.cols, "submatrix out of bounds");
        TileView {
            // SAFETY: offset stays inside the window (or one past for empty views).
            ptr: unsafe { self.ptr.add(r + c * self.ld) },
            rows,
            cols,
            ld: self.ld,
            row_off: self.row_off + r,
            col_off: self.col_off + c,
            _marker: PhantomData,
        }
    }

    /// Splits into `[left | right]` at column `c`.
    pub fn split_cols(self, c: usize) -> (TileView<'a>, TileView<'a>) {
        (
            self.submatrix(0, 0, self.rows, c),
            self.submatrix(0, c, self.rows, self.cols - c),
        )
    }

    /// Splits into `[top; bottom]` at row `r`.
    pub fn split_rows(self, r: usize) -> (TileView<'a>, TileView<'a>) {
        (
            self.submatrix(0, 0, r, self.cols),
            self.submatrix(r, 0, self.rows - r, self.cols),
        )
    }

    /// Quadrants `(A11, A21, A22)` of a square view split at `n1`.
    pub fn split_lower(self, n1: usize) -> (TileView<'a>, TileView<'a>, TileView<'a>) {
        assert!(self.is_square() && n1 <= self.rows);
        let n2 = self.rows - n1;
        (
            self.submatrix(0, 0, n1, n1),
            self.submatrix(n1, 0, n2, n1),
            self.submatrix(n1, n1, n2, n2),
        )
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.cols)
            .flat_map(|j| self.col(j).iter())
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        (0..self.cols)
            .flat_map(|j| self.col(j).iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.cols).all(|j| self.col(j).iter().all(|x| x.is_finite()))
    }

    /// True when every element on or below the diagonal is finite.
    pub fn lower_is_finite(&self) -> bool {
        (0..self.cols).all(|j| self.col(j).iter().skip(j).all(|x| x.is_finite()))
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

impl<'a> TileViewMut<'a> {
    shared_view_methods!();

    /// Reborrows as a read-only view.
    pub fn rb(&self) -> TileView<'_> {
        TileView {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    /// Reborrows mutably for a shorter lifetime.
    pub fn rb_mut(&mut self) -> TileViewMut<'_> {
        TileViewMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    /// Converts into a read-only view with the full lifetime.
    pub fn into_const(self) -> TileView<'a> {
        TileView {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        // SAFETY: bounds checked above.
        unsafe { *self.ptr.add(i + j * self.ld) = value }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        assert!(j < self.cols, "column {j} out of bounds");
        // SAFETY: see `TileView::col`.
        unsafe { std::slice::from_raw_parts(self.ptr.add(j * self.ld), self.rows) }
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        assert!(j < self.cols, "column {j} out of bounds");
        // SAFETY: column j of the window is exclusively ours.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(j * self.ld), self.rows) }
    }

    /// Column `src` shared and column `dst` mutable at the same time.
    #[inline]
    pub fn col_pair_mut(&mut self, src: usize, dst: usize) -> (&[f64], &mut [f64]) {
        assert!(src != dst && src < self.cols && dst < self.cols, "bad column pair");
        // SAFETY: distinct columns of one window never overlap.
        unsafe {
            (
                std::slice::from_raw_parts(self.ptr.add(src * self.ld), self.rows),
                std::slice::from_raw_parts_mut(self.ptr.add(dst * self.ld), self.rows),
            )
        }
    }

    pub fn submatrix_mut(self, r: usize, c: usize, rows: usize, cols: usize) -> TileViewMut<'a> {
        assert!(r + rows <= self.rows && c + cols <= self.cols, "submatrix out of bounds");
        TileViewMut {
            // SAFETY: offset stays inside the window (or one past for empty views).
            ptr: unsafe { self.ptr.add(r + c * self.ld) },
            rows,
            cols,
            ld: self.ld,
            row_off: self.row_off + r,
            col_off: self.col_off + c,
            _marker: PhantomData,
        }
    }

    fn alias(&self) -> TileViewMut<'a> {
        TileViewMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            row_off: self.row_off,
            col_off: self.col_off,
            _marker: PhantomData,
        }
    }

    /// Splits into disjoint `[left | right]` at column `c`.
    pub fn split_cols(self, c: usize) -> (TileViewMut<'a>, TileViewMut<'a>) {
        assert!(c <= self.cols);
        let (rows, cols) = (self.rows, self.cols);
        let left = self.alias().submatrix_mut(0, 0, rows, c);
        let right = self.submatrix_mut(0, c, rows, cols - c);
        (left, right)
    }

    /// Splits into disjoint `[top; bottom]` at row `r`.
    pub fn split_rows(self, r: usize) -> (TileViewMut<'a>, TileViewMut<'a>) {
        assert!(r <= self.rows);
        let (rows, cols) = (self.rows, self.cols);
        let top = self.alias().submatrix_mut(0, 0, r, cols);
        let bottom = self.submatrix_mut(r, 0, rows - r, cols);
        (top, bottom)
    }

    /// Disjoint quadrants `(A11, A21, A22)` of a square view split at `n1`.
    /// The strictly upper block `A12` is not handed out.
    pub fn split_lower(self, n1: usize) -> (TileViewMut<'a>, TileViewMut<'a>, TileViewMut<'a>) {
        assert!(self.is_square() && n1 <= self.rows);
        let n2 = self.rows - n1;
        let a11 = self.alias().submatrix_mut(0, 0, n1, n1);
        let a21 = self.alias().submatrix_mut(n1, 0, n2, n1);
        let a22 = self.submatrix_mut(n1, n1, n2, n2);
        (a11, a21, a22)
    }

    pub fn fill(&mut self, value: f64) {
        for j in 0..self.cols {
            self.col_mut(j).fill(value);
        }
    }

    pub fn copy_from(&mut self, src: TileView<'_>) {
        assert_eq!((self.rows, self.cols), (src.rows(), src.cols()), "shape mismatch");
        for j in 0..self.cols {
            self.col_mut(j).copy_from_slice(src.col(j));
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rb().max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.rb().is_finite()
    }

    pub fn lower_is_finite(&self) -> bool {
        self.rb().lower_is_finite()
    }
}

impl fmt::Debug for TileView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TileView({}, ld {})", self.window(), self.ld)
    }
}

impl fmt::Debug for TileViewMut<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TileViewMut({}, ld {})", self.window(), self.ld)
    }
}
