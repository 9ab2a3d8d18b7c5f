//! JSON-lines export of kernel entries.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::kernels::KernelHierarchy;

#[derive(Serialize)]
struct Record<'a> {
    n: usize,
    q: &'a [i64],
    p: Vec<&'a [i64]>,
    kappa_index: Option<usize>,
    kappa: Option<f64>,
    re_im: Vec<f64>,
}

/// Writes one line per stored `(n, q, p-tuple, kappa-index)`. Plain levels list
/// `p` sorted by mode index; extended levels list `q'` first.
pub fn write_kernel_dump<W: Write>(h: &KernelHierarchy, mut out: W) -> Result<()> {
    let l = h.layout().clone();
    let bx = h.truncation_box();
    for n in 0..=h.n_max() {
        let len = l.dpow(n + 1);
        for q in 0..l.modes() {
            for rank in 0..l.multisets(n) {
                let t = &h.plain[n][l.plain_offset(n, q, rank)..][..len];
                let rec = Record {
                    n,
                    q: bx.coords(q),
                    p: l.tuple(n, rank).iter().map(|&a| bx.coords(a as usize)).collect(),
                    kappa_index: None,
                    kappa: None,
                    re_im: t.iter().flat_map(|z| [z.re, z.im]).collect(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
    }
    if let Some(fam) = &h.kappa {
        for j in 0..fam.grid.len() {
            for n in 1..=h.n_max() {
                let len = l.dpow(n + 1);
                for q in 0..l.modes() {
                    for qp in 0..l.modes() {
                        for rank in 0..l.multisets(n - 1) {
                            let t = &fam.levels[j][n - 1][l.ext_offset(n, q, qp, rank)..][..len];
                            let mut p = vec![bx.coords(qp)];
                            p.extend(l.tuple(n - 1, rank).iter().map(|&a| bx.coords(a as usize)));
                            let rec = Record {
                                n,
                                q: bx.coords(q),
                                p,
                                kappa_index: Some(j),
                                kappa: Some(fam.grid.kappa(j)),
                                re_im: t.iter().flat_map(|z| [z.re, z.im]).collect(),
                            };
                            serde_json::to_writer(&mut out, &rec)?;
                            out.write_all(b"\n")?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
