use crate::protocols::{srcr_next_hop, RoutingView};
use crate::scalar::Scalar;

/// ETX of `view`'s owner toward `d`, with the neighbour achieving it:
/// the minimum over neighbours `j` of `ETX(j, d) + W(owner, j)`. The
/// destination itself is at zero; an unreachable destination is at +inf.
pub fn compute_etx<S: Scalar, V: RoutingView<S>>(view: &V, d: usize) -> (S, Option<usize>) {
    if d == view.owner() {
        return (S::zero(), None);
    }
    match srcr_next_hop(view, d) {
        Some(dec) => (dec.score, Some(dec.next_hop)),
        None => (S::unreachable(), None),
    }
}
