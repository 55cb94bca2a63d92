//! Randomized structural invariants: index maps, pattern algebra, chordal
//! extensions, spectral projections, mesh operators, and the sign-flip
//! symmetry of the functional-map norms.

use coarsen_core::chordal::{chordal_extension, is_chordal, maximal_cliques};
use coarsen_core::eig::{extreme_eigenvalues, psd_project, smallest_eigenpairs, EigenBasis};
use coarsen_core::meshgen::jittered_grid;
use coarsen_core::meshops::{cotan_laplacian, lumped_mass, normalize_mesh, CoarseningSetup};
use coarsen_core::metrics::{functional_map, laplacian_commutativity, orthonormality};
use coarsen_core::sparsemat::{SymPattern, TrilIndexMap};
use coarsen_core::DMatrix;
use proptest::prelude::*;

fn pattern_strategy(max_n: usize) -> impl Strategy<Value = SymPattern> {
    (2..max_n).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |edges| {
            let offdiag = edges.into_iter().filter(|(a, b)| a != b);
            SymPattern::from_edges(n, offdiag).expect("indices are in range")
        })
    })
}

fn pattern_with_values(max_n: usize) -> impl Strategy<Value = (SymPattern, Vec<f64>)> {
    pattern_strategy(max_n).prop_flat_map(|p| {
        let len = p.len();
        (Just(p), prop::collection::vec(-1e3..1e3f64, len))
    })
}

fn symmetric_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, n * n).prop_map(move |raw| {
        let a = DMatrix::from_vec(n, n, raw);
        (&a + a.transpose()) * 0.5
    })
}

fn symmetric_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (2..8usize).prop_flat_map(|n| (symmetric_matrix(n), symmetric_matrix(n)))
}

fn grid_mesh() -> impl Strategy<Value = coarsen_core::meshops::TriMesh> {
    (2..6usize, 2..6usize, any::<u64>()).prop_map(|(r, c, s)| jittered_grid(r, c, s))
}

proptest! {
    #[test]
    fn compress_expand_round_trips((p, x) in pattern_with_values(24)) {
        let map = TrilIndexMap::new(p);
        let back = map.compress(&map.expand(&x)).unwrap();
        for (a, (&got, &want)) in back.iter().zip(&x).enumerate() {
            prop_assert_eq!(got.to_bits(), want.to_bits(), "entry {}", a);
        }
    }

    #[test]
    fn breadth_positions_tile_the_square(p in pattern_strategy(24)) {
        let n = p.n();
        let len = p.len();
        let map = TrilIndexMap::new(p);
        let mut seen = Vec::new();
        for a in 0..map.len() {
            seen.extend(map.breadth(a).positions());
        }
        // Every off-diagonal entry owns two cells of the square, the
        // diagonal one; no cell is claimed twice.
        prop_assert_eq!(seen.len(), 2 * len - n);
        seen.sort_unstable();
        prop_assert!(seen.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(seen.iter().all(|&q| q < n * n));
    }

    #[test]
    fn pattern_powers_nest(p in pattern_strategy(20)) {
        let mut prev = p.power(1);
        prop_assert!(p.is_subset_of(&prev));
        for r in 2..4 {
            let next = p.power(r);
            prop_assert!(prev.is_subset_of(&next), "power {} not nested", r);
            prev = next;
        }
    }

    #[test]
    fn chordal_extension_is_chordal_and_covers(p in pattern_strategy(24)) {
        let (ext, ordering) = chordal_extension(&p);
        prop_assert!(is_chordal(&ext));
        prop_assert!(p.is_subset_of(&ext));
        let cliques = maximal_cliques(&ext, &ordering).unwrap();
        let union = cliques.pair_union();
        prop_assert_eq!(union.entries(), ext.entries());
    }

    #[test]
    fn psd_projection_is_idempotent_and_nearest((a, other) in symmetric_pair()) {
        let scale = 1.0 + a.norm();
        let p = psd_project(&a);
        let (lo, _) = extreme_eigenvalues(&p);
        prop_assert!(lo >= -1e-9 * scale);
        prop_assert!((psd_project(&p) - &p).norm() <= 1e-8 * scale);
        // Frobenius optimality against an arbitrary PSD competitor.
        let q = psd_project(&other);
        prop_assert!((&a - &p).norm() <= (&a - &q).norm() + 1e-8 * scale);
    }

    #[test]
    fn laplacian_annihilates_constants_and_is_psd(mesh in grid_mesh()) {
        let (mesh, _) = normalize_mesh(&mesh).unwrap();
        let l = cotan_laplacian(&mesh).unwrap();
        let ones = vec![1.0; l.n()];
        let resid = l.apply(&ones);
        let scale = 1.0 + l.max_abs();
        prop_assert!(resid.iter().all(|&r| r.abs() <= 1e-10 * scale));
        let (lo, hi) = extreme_eigenvalues(&l.to_dense());
        prop_assert!(lo >= -1e-9 * hi.max(1.0));
    }

    #[test]
    fn lumped_mass_splits_the_total_area(mesh in grid_mesh()) {
        let mass = lumped_mass(&mesh).unwrap();
        prop_assert!(mass.iter().all(|&m| m > 0.0));
        let mut area = 0.0;
        for f in &mesh.faces {
            let [a, b, c] = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let w = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            area += 0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        }
        let total: f64 = mass.iter().sum();
        prop_assert!((total - area).abs() <= 1e-12 * area.max(1.0));
    }

    #[test]
    fn sampling_setup_is_well_formed(
        mesh in grid_mesh(),
        m in 4..10usize,
        seed in any::<prop::sample::Index>(),
    ) {
        let n = mesh.n_vertices();
        prop_assume!(m < n);
        let fine_mass = lumped_mass(&mesh).unwrap();
        let pattern = mesh.edge_pattern();
        let setup =
            CoarseningSetup::build(&mesh, &pattern, &fine_mass, m, 1, seed.index(n)).unwrap();
        prop_assert_eq!(setup.samples.len(), m);
        prop_assert!(setup.samples.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(setup.assignment.iter().all(|&k| k < m));
        prop_assert!(setup.coarse_mass.iter().all(|&v| v > 0.0));
        let fine: f64 = fine_mass.iter().sum();
        let coarse: f64 = setup.coarse_mass.iter().sum();
        prop_assert!((fine - coarse).abs() <= 1e-12 * fine);
        prop_assert_eq!(setup.pattern.n(), m);
    }

    #[test]
    fn eigenbasis_solves_the_pencil(mesh in grid_mesh(), pick in any::<prop::sample::Index>()) {
        let (mesh, _) = normalize_mesh(&mesh).unwrap();
        let l = cotan_laplacian(&mesh).unwrap();
        let mass = lumped_mass(&mesh).unwrap();
        let n = l.n();
        let k = 1 + pick.index(n);
        let basis = smallest_eigenpairs(&l, &mass, k).unwrap();
        prop_assert!(basis.values().windows(2).all(|w| w[0] <= w[1]));
        // M-orthonormality and the residual bound hold pairwise.
        let phi = basis.vectors();
        for a in 0..k {
            for b in 0..k {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += phi[(i, a)] * mass[i] * phi[(i, b)];
                }
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-8, "gram ({},{}) = {}", a, b, dot);
            }
        }
        let (_, l_norm) = extreme_eigenvalues(&l.to_dense());
        for c in 0..k {
            let col: Vec<f64> = (0..n).map(|i| phi[(i, c)]).collect();
            let lphi = l.apply(&col);
            let mut sq = 0.0;
            for i in 0..n {
                let r = lphi[i] - basis.values()[c] * mass[i] * col[i];
                sq += r * r;
            }
            prop_assert!(sq.sqrt() <= 1e-7 * l_norm.max(1.0), "pair {} residual", c);
        }
    }

    #[test]
    fn metric_norms_ignore_sign_flips(
        mesh in grid_mesh(),
        coarse_flips in prop::collection::vec(any::<bool>(), 8),
        fine_flips in prop::collection::vec(any::<bool>(), 8),
    ) {
        let (mesh, _) = normalize_mesh(&mesh).unwrap();
        let l = cotan_laplacian(&mesh).unwrap();
        let mass = lumped_mass(&mesh).unwrap();
        let k = 8.min(l.n());
        let basis = smallest_eigenpairs(&l, &mass, k).unwrap();
        let setup = CoarseningSetup::identity(l.pattern(), &mass);
        let restriction = setup.restriction();
        let flip_basis = |flips: &[bool]| {
            let mut vectors = basis.vectors().clone();
            for (c, &flip) in flips.iter().take(k).enumerate() {
                if flip {
                    let mut col = vectors.column_mut(c);
                    col *= -1.0;
                }
            }
            EigenBasis::new(basis.values().to_vec(), vectors)
        };
        let fm = functional_map(&basis, &mass, &restriction, &basis).unwrap();
        let alt_coarse = flip_basis(&coarse_flips);
        let alt_fine = flip_basis(&fine_flips);
        let fm_flip = functional_map(&alt_coarse, &mass, &restriction, &alt_fine).unwrap();
        // Flips negate whole product terms, so the norms agree bit for bit.
        let l_now = laplacian_commutativity(&fm).unwrap();
        let l_alt = laplacian_commutativity(&fm_flip).unwrap();
        prop_assert_eq!(l_now.to_bits(), l_alt.to_bits());
        prop_assert_eq!(orthonormality(&fm).to_bits(), orthonormality(&fm_flip).to_bits());
    }
}
