//! Fixed rotated-BRIEF sampling pattern.
//!
//! 256 point pairs `(x1, y1, x2, y2)` drawn once from an isotropic Gaussian
//! (sigma = 31/5) and clipped to a disc of radius 13, so every rotated pair
//! stays inside a 31 x 31 patch.

pub(crate) const BRIEF_PATTERN: [[i8; 4]; 256] = [
    [4, -9, 4, -6],
    [0, 1, -3, 11],
    [4, 3, -9, 8],
    [-10, -8, -5, -3],
    [4, 2, -2, -8],
    [1, 4, 5, 0],
    [2, 0, -1, 5],
    [4, -1, -3, 4],
    [3, -3, 8, 5],
    [2, -10, -7, -3],
    [-10, 0, -7, -4],
    [5, 5, -2, 1],
    [-10, -4, 4, -8],
    [5, 1, 4, 3],
    [-8, -7, 4, -1],
    [4, -9, 3, -12],
    [6, -3, -1, -4],
    [-3, -1, 3, 5],
    [-1, -2, -2, 0],
    [-3, -2, 2, -4],
    [-6, -4, -8, 4],
    [3, -1, -9, 0],
    [-10, -3, 4, -4],
    [0, 7, 1, -7],
    [-1, -6, 2, -7],
    [-1, 3, 2, 8],
    [10, 5, -2, 2],
    [-3, -2, 0, 6],
    [12, -3, 7, 0],
    [3, -2, 0, 5],
    [-5, -4, 5, 1],
    [1, -3, 3, 3],
    [8, 1, -4, -3],
    [-2, 6, -2, -2],
    [10, -3, 9, -3],
    [0, -3, 7, -10],
    [6, -2, -3, 6],
    [-7, 4, 6, 5],
    [1, 0, -3, -3],
    [-1, 1, 0, 7],
    [0, -9, -5, 2],
    [3, 4, 1, 7],
    [-7, 4, 1, -8],
    [2, 0, 4, 0],
    [0, -4, 1, 0],
    [-6, 9, -8, 6],
    [-3, -7, -4, -5],
    [-3, -9, 1, 1],
    [7, -4, 1, -6],
    [-4, 3, 7, -2],
    [-8, -2, 2, -3],
    [-3, 6, 0, -2],
    [-4, 1, 4, 5],
    [-10, -7, -9, -5],
    [-2, -3, -9, 1],
    [2, 4, 3, 1],
    [9, -3, -5, 2],
    [4, 2, -5, -4],
    [-1, 9, 5, -2],
    [9, -5, 1, -1],
    [-3, 9, -1, 9],
    [6, -3, -3, 2],
    [7, 2, 11, 2],
    [-5, -2, -1, 0],
    [-1, 5, 2, 12],
    [-3, -3, 6, 4],
    [-1, -7, -1, 0],
    [-12, -4, -6, -5],
    [2, -7, 3, 10],
    [-8, -5, -8, 5],
    [4, 11, -9, 2],
    [2, 4, 3, -1],
    [-7, -2, -10, 2],
    [-3, -3, 0, -8],
    [1, 1, -3, -10],
    [4, -7, 0, -5],
    [-2, 8, 2, 2],
    [-1, 10, -9, 3],
    [5, 2, -10, 3],
    [2, 0, -5, 3],
    [5, 8, 1, 4],
    [0, 2, 6, 9],
    [6, -4, 1, 7],
    [-9, -8, -7, -7],
    [-1, -11, 1, -4],
    [2, 4, 7, 7],
    [0, -4, -12, 0],
    [11, -1, -4, -7],
    [6, -3, -6, -9],
    [5, -2, -6, -1],
    [1, -1, 4, -3],
    [-2, 7, 4, -3],
    [4, 11, 6, 6],
    [4, -5, -1, 7],
    [-5, 3, 5, -6],
    [1, 6, -5, -2],
    [5, 1, 12, 0],
    [-5, 6, 8, 7],
    [-9, 6, 0, -1],
    [-2, 5, -5, -7],
    [-7, -7, -12, 0],
    [-4, 4, 6, 9],
    [3, -1, 3, 1],
    [-7, -1, 3, 6],
    [1, 2, -4, 0],
    [0, 5, 3, 0],
    [-6, -5, 0, 7],
    [6, 5, 11, 1],
    [-2, -2, -10, -1],
    [-9, -3, 4, -9],
    [-6, 4, -4, -1],
    [-4, 1, 2, -6],
    [4, -6, 1, 8],
    [-9, 5, 0, 1],
    [4, 6, 5, 7],
    [5, 0, 5, -5],
    [-8, 9, 5, 12],
    [-8, -1, -2, -6],
    [0, 4, -11, -6],
    [4, -6, -4, -11],
    [9, -2, -3, -12],
    [-7, 9, -2, 5],
    [8, 0, 1, -3],
    [4, 3, -5, 5],
    [1, -3, -3, 5],
    [0, -7, -10, -3],
    [2, 0, 5, 0],
    [3, -1, -5, -1],
    [-6, -5, 2, 7],
    [-7, -1, 9, -1],
    [4, 4, -6, 5],
    [-2, 1, -2, -6],
    [6, -7, 11, 5],
    [-1, 2, 1, 2],
    [-5, 7, -5, -4],
    [-13, 0, -8, -9],
    [9, 8, 1, 0],
    [-11, -5, -5, 1],
    [6, 1, -9, 2],
    [-1, 4, 2, 3],
    [-7, 6, 1, -10],
    [2, 2, -8, -6],
    [-3, -3, -1, -8],
    [1, 3, -3, -12],
    [-2, -8, 2, 5],
    [-7, -6, -4, 1],
    [3, 3, 0, 2],
    [-9, 0, -11, -2],
    [9, -9, 0, 5],
    [-7, -2, 5, -3],
    [2, 1, 0, -5],
    [8, -3, 2, 2],
    [5, -10, -2, -12],
    [3, -6, 0, -6],
    [-8, 6, 5, 0],
    [4, 3, -8, 1],
    [-4, 2, 0, 1],
    [6, -4, 6, 1],
    [-1, 5, -10, -3],
    [0, 2, 2, -12],
    [-6, 5, 7, 8],
    [4, 2, -2, -12],
    [8, -4, -11, 0],
    [-1, -5, -8, 1],
    [5, -4, 5, -8],
    [-8, -3, -8, -8],
    [6, -2, 5, 0],
    [-4, -2, -7, 5],
    [6, 2, -3, 3],
    [1, -3, -7, -9],
    [-2, 2, 1, 5],
    [-1, -6, -1, 9],
    [0, 2, -8, -5],
    [-8, 4, 0, -8],
    [-7, -10, -2, 5],
    [5, -5, -5, 11],
    [-8, -5, -2, -6],
    [-2, 5, -3, 2],
    [-4, -4, 0, -1],
    [-8, 7, -9, 4],
    [10, 3, 1, 5],
    [1, 1, 7, 1],
    [4, -2, 1, 2],
    [0, 3, 5, 0],
    [11, 1, 5, 4],
    [3, 6, 6, 6],
    [4, 1, 7, -3],
    [3, 3, -1, 1],
    [-2, 4, 6, -3],
    [-10, 1, 6, -5],
    [4, 3, -5, 7],
    [-7, 7, 10, 8],
    [-2, -2, 5, -9],
    [-4, 1, -7, -3],
    [3, -1, 5, -8],
    [-3, 3, 4, 1],
    [3, 10, 2, 3],
    [10, -4, -3, -12],
    [-2, 6, 9, 0],
    [-2, -11, 1, 0],
    [2, 6, -2, 7],
    [-10, -8, 0, 5],
    [0, -4, 1, -1],
    [3, -6, -9, 1],
    [9, 5, 4, -3],
    [-5, -8, 2, -1],
    [7, -3, 5, 0],
    [-4, 7, -7, -3],
    [-4, 6, 8, -10],
    [2, 2, 2, 7],
    [1, 3, -5, 4],
    [3, 1, -4, -1],
    [-1, -1, 2, 0],
    [-3, 3, 3, 3],
    [-10, 6, -6, 6],
    [5, -3, -1, -5],
    [3, 5, -9, -5],
    [-6, -2, 3, 11],
    [-4, -7, -5, 2],
    [-6, -7, 0, -13],
    [9, -5, 5, 3],
    [10, 8, 1, 2],
    [-4, 2, 2, -5],
    [-2, 1, -5, 1],
    [2, 7, -4, 6],
    [8, 5, -3, 8],
    [3, 1, 0, 5],
    [-9, -9, 0, -1],
    [1, -3, 3, -5],
    [2, -2, 3, -10],
    [-6, 8, 1, -3],
    [-10, -7, 0, -4],
    [-2, -6, 0, 7],
    [0, 5, -4, -1],
    [1, -2, -2, -9],
    [8, 2, 4, -1],
    [6, 0, 10, -2],
    [2, -6, -2, 9],
    [4, -6, 1, 3],
    [4, -2, -5, -12],
    [0, 0, 5, -9],
    [2, 3, 1, -3],
    [-3, 3, 0, -4],
    [-7, 6, -4, -4],
    [4, -4, 6, 5],
    [-1, 1, 3, 3],
    [-4, 2, 1, -2],
    [1, -6, 1, 3],
    [6, 0, 4, 0],
    [4, -1, 0, -1],
    [-5, 6, -4, 2],
    [-1, 6, 4, -5],
    [4, 5, -5, -2],
    [7, -2, 0, -7],
    [-1, -9, 1, 6],
    [2, -3, -10, -1],
];
