//! MPS operations checked against brute-force state vectors.

use adiaprep_core::linalg::{c64, svd, C64, DenseMatrix};
use adiaprep_core::mps::{fidelity, overlap, MatrixProductState, SiteTensor, Sweep, TruncationPolicy};
use adiaprep_core::states::{path_operator, path_state, BondKind, StateFamily};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_c(rng: &mut StdRng) -> C64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_mps(rng: &mut StdRng, dims: &[usize], bond: usize) -> MatrixProductState {
    let n = dims.len();
    let sites = (0..n)
        .map(|k| {
            let l = if k == 0 { 1 } else { bond };
            let r = if k == n - 1 { 1 } else { bond };
            SiteTensor::from_fn(l, dims[k], r, |_, _, _| random_c(rng))
        })
        .collect();
    MatrixProductState::new(sites).unwrap()
}

fn random_unitary(rng: &mut StdRng, n: usize) -> DenseMatrix {
    let m = DenseMatrix::from_fn(n, n, |_, _| random_c(rng));
    let d = svd(&m).unwrap();
    &d.u * &d.vt
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Applies a gate on sites `i, i + 1` of a dense vector, site 0 most significant.
fn apply_dense(psi: &[C64], dims: &[usize], gate: &DenseMatrix, i: usize) -> Vec<C64> {
    let left: usize = dims[..i].iter().product();
    let (d1, d2) = (dims[i], dims[i + 1]);
    let right: usize = dims[i + 2..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for l in 0..left {
        for r in 0..right {
            for row in 0..d1 * d2 {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..d1 * d2 {
                    acc += gate.get(row, col) * psi[(l * d1 * d2 + col) * right + r];
                }
                out[(l * d1 * d2 + row) * right + r] = acc;
            }
        }
    }
    out
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn random_gate_sequences_match_dense_vector() {
    let mut rng = StdRng::seed_from_u64(7);
    for dims in [vec![2, 2, 2, 2], vec![2, 3, 2, 2, 3, 2], vec![2; 8], vec![2, 4, 4, 4, 2]] {
        let mut mps = random_mps(&mut rng, &dims, 3);
        mps.canonicalize(0);
        let mut psi = mps.to_dense();
        let policy = TruncationPolicy::exact();
        for _ in 0..3 {
            for i in 0..dims.len() - 1 {
                let g = random_unitary(&mut rng, dims[i] * dims[i + 1]);
                mps.apply_two_site_gate(&g, i, &policy, Sweep::Right).unwrap();
                psi = apply_dense(&psi, &dims, &g, i);
            }
            for i in (0..dims.len() - 1).rev() {
                let g = random_unitary(&mut rng, dims[i] * dims[i + 1]);
                mps.apply_two_site_gate(&g, i, &policy, Sweep::Left).unwrap();
                psi = apply_dense(&psi, &dims, &g, i);
            }
        }
        let scale = norm(&psi);
        assert!(max_diff(&mps.to_dense(), &psi) < 1e-10 * scale, "dims {dims:?}");
        assert!(mps.canonical_defect() < 1e-10);
    }
}

#[test]
fn overlap_and_fidelity_match_dense_inner_product() {
    let mut rng = StdRng::seed_from_u64(11);
    let dims = [2; 6];
    for _ in 0..5 {
        let a = random_mps(&mut rng, &dims, 2);
        let b = random_mps(&mut rng, &dims, 3);
        let (va, vb) = (a.to_dense(), b.to_dense());
        let z = inner(&va, &vb);
        let ov = overlap(&a, &b).unwrap().to_complex();
        assert!((ov - z).norm() < 1e-12 * z.norm().max(1.0));
        let f = z.norm_sqr() / (inner(&va, &va).re * inner(&vb, &vb).re);
        assert!((fidelity(&a, &b).unwrap() - f).abs() < 1e-12);
    }
}

/// `Q^{⊗(n_pairs−1)}` applied to the explicit pair vector.
fn brute_force_chain(q: &DenseMatrix, pair: &DenseMatrix, n_pairs: usize) -> Vec<C64> {
    let dv = pair.rows();
    // Virtual qudits in order: boundary, (right of pair 0, left of pair 1), ..., boundary.
    let n_virtual = 2 * n_pairs;
    let mut virt = vec![c64(1.0, 0.0)];
    for _ in 0..n_pairs {
        let mut next = vec![C64::new(0.0, 0.0); virt.len() * dv * dv];
        for (k, &v) in virt.iter().enumerate() {
            for a in 0..dv {
                for b in 0..dv {
                    next[(k * dv + a) * dv + b] = v * pair.get(a, b);
                }
            }
        }
        virt = next;
    }
    assert_eq!(virt.len(), dv.pow(n_virtual as u32));
    // Apply Q to every interior virtual pair (positions 2k−1, 2k).
    let d = q.rows();
    let mut dims: Vec<usize> = vec![dv; n_virtual];
    let mut psi = virt;
    for site in 1..n_pairs {
        let pos = site; // after earlier merges, the pair sits at index `site`
        let left: usize = dims[..pos].iter().product();
        let right: usize = dims[pos + 2..].iter().product();
        let mut out = vec![C64::new(0.0, 0.0); left * d * right];
        for l in 0..left {
            for r in 0..right {
                for i in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for ab in 0..dv * dv {
                        acc += q.get(i, ab) * psi[(l * dv * dv + ab) * right + r];
                    }
                    out[(l * d + i) * right + r] = acc;
                }
            }
        }
        dims.splice(pos..pos + 2, [d]);
        psi = out;
    }
    let n = norm(&psi);
    psi.iter().map(|z| z / n).collect()
}

#[test]
fn path_state_matches_brute_force_construction() {
    let fam = StateFamily::MpsFamily { g: -0.3 };
    let q = path_operator(&fam.target_operator().unwrap(), 0.5).unwrap();
    let expect = brute_force_chain(q.matrix(), &BondKind::PlusPair.pair_matrix(), 4);
    let got = path_state(&fam, 0.5, 4).unwrap().to_dense();
    let phase = inner(&got, &expect);
    assert!((phase.norm() - 1.0).abs() < 1e-12);
    assert!(max_diff(&got, &expect) < 1e-12);

    let aklt = StateFamily::Aklt1d;
    let q = path_operator(&aklt.target_operator().unwrap(), 0.8).unwrap();
    let expect = brute_force_chain(q.matrix(), &BondKind::Singlet.pair_matrix(), 3);
    let got = path_state(&aklt, 0.8, 3).unwrap().to_dense();
    assert!((inner(&got, &expect).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn two_site_rdm_matches_partial_trace() {
    let mut rng = StdRng::seed_from_u64(3);
    let dims = [2, 3, 2, 2];
    let mut mps = random_mps(&mut rng, &dims, 3);
    let psi = mps.to_dense();
    let nrm2 = inner(&psi, &psi).re;
    for center in [None, Some(1)] {
        if let Some(c) = center {
            mps.canonicalize(c);
        }
        for i in 0..dims.len() - 1 {
            let left: usize = dims[..i].iter().product();
            let (d1, d2) = (dims[i], dims[i + 1]);
            let right: usize = dims[i + 2..].iter().product();
            let mut rho = DenseMatrix::zeros(d1 * d2, d1 * d2);
            for a in 0..d1 * d2 {
                for b in 0..d1 * d2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..left {
                        for r in 0..right {
                            acc += psi[(l * d1 * d2 + a) * right + r]
                                * psi[(l * d1 * d2 + b) * right + r].conj();
                        }
                    }
                    rho.set(a, b, acc / nrm2);
                }
            }
            assert!(mps.two_site_rdm(i).unwrap().max_diff(&rho) < 1e-12, "edge {i}");
            assert!(mps.all_two_site_rdms()[i].max_diff(&rho) < 1e-12);
        }
    }
}

#[test]
fn pair_across_cut_is_maximally_mixed() {
    let s = adiaprep_core::states::pair_product_state(2, BondKind::Singlet).unwrap();
    // Sites [2, 4, 2]: sites 1 and 2 hold one qubit of the first pair.
    let rho = s.two_site_rdm(1).unwrap();
    let eigs = adiaprep_core::linalg::eigvalsh(&rho).unwrap();
    let nonzero: Vec<f64> = eigs.into_iter().filter(|&e| e > 1e-12).collect();
    assert_eq!(nonzero.len(), 2);
    for e in nonzero {
        assert!((e - 0.5).abs() < 1e-12);
    }
}

#[test]
fn canonicalization_is_gauge_only() {
    let mut rng = StdRng::seed_from_u64(5);
    let mps = random_mps(&mut rng, &[2, 2, 3, 2, 2], 4);
    let psi = mps.to_dense();
    for c in 0..5 {
        let moved = mps.clone().canonicalized(c);
        assert!(moved.canonical_defect() < 1e-12);
        assert!(max_diff(&moved.to_dense(), &psi) < 1e-10 * norm(&psi));
    }
}
