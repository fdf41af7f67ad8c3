//! Gradient-weighted attention maps.
//!
//! For a chosen action, the gradient of that q-entry with respect to the last
//! conv block's post-ReLU feature maps yields one weight per channel (its
//! spatial mean). The weighted, ReLU-ed sum of the feature maps is upscaled
//! back to grid resolution by nearest neighbor and max-normalized to [0, 1].

use super::qnet::{Mode, QNetwork};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub fn grad_cam(
    net: &QNetwork,
    encoding: &Tensor,
    mask: &[bool],
    action: usize,
) -> Result<Tensor> {
    if action >= net.actions() {
        return Err(Error::argument(format!(
            "action {} outside {} outputs",
            action,
            net.actions()
        )));
    }
    let shape = encoding.shape().to_vec();
    if shape.len() != 3 {
        return Err(Error::argument("state encoding must be (channels, rows, cols)"));
    }
    let batched = Tensor::from_vec(
        vec![1, shape[0], shape[1], shape[2]],
        encoding.data().to_vec(),
    );
    let (_, trace) = net.forward(&batched, mask, Mode::Eval)?;

    let mut gq = Tensor::zeros(vec![1, net.actions()]);
    gq.data_mut()[action] = 1.0;
    let (_, grad_act) = net.backward(&trace, &gq);

    let acts = net.last_conv_activations(&trace);
    let [_, channels, h, w] = match acts.shape() {
        [a, b, c, d] => [*a, *b, *c, *d],
        _ => unreachable!(),
    };

    // channel weights: spatial mean of the gradient
    let plane = h * w;
    let mut map = vec![0.0f64; plane];
    for k in 0..channels {
        let g = &grad_act.data()[k * plane..(k + 1) * plane];
        let a = &acts.data()[k * plane..(k + 1) * plane];
        let weight = g.iter().sum::<f64>() / plane as f64;
        for (m, &av) in map.iter_mut().zip(a) {
            *m += weight * av;
        }
    }
    for m in map.iter_mut() {
        if *m < 0.0 {
            *m = 0.0;
        }
    }

    // nearest-neighbor upscale with the pixel-center rule
    let (rows, cols) = (net.rows, net.cols);
    let mut full = Tensor::zeros(vec![rows, cols]);
    for r in 0..rows {
        let sr = (((r as f64 + 0.5) * h as f64 / rows as f64).floor() as usize).min(h - 1);
        for c in 0..cols {
            let sc = (((c as f64 + 0.5) * w as f64 / cols as f64).floor() as usize).min(w - 1);
            full.data_mut()[r * cols + c] = map[sr * w + sc];
        }
    }

    let max = full.data().iter().fold(0.0f64, |m, &v| m.max(v));
    if max > 0.0 {
        for v in full.data_mut() {
            *v /= max;
        }
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::qnet::{Arch, HeadKind};
    use crate::rng::Rng;

    fn encoding(rng: &mut Rng, c: usize, r: usize, cc: usize) -> Tensor {
        Tensor::from_vec(
            vec![c, r, cc],
            (0..c * r * cc).map(|_| rng.next_f64()).collect(),
        )
    }

    #[test]
    fn map_dims_match_grid_and_range() {
        let net = QNetwork::new(Arch::Small, HeadKind::Single, 8, 6, 3, 11).unwrap();
        let mut rng = Rng::seeded(1);
        let enc = encoding(&mut rng, 3, 8, 6);
        let mask = vec![true; 48];
        let map = grad_cam(&net, &enc, &mask, 17).unwrap();
        assert_eq!(map.shape(), &[8, 6]);
        assert!(map.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn nonzero_map_peaks_at_one() {
        let net = QNetwork::new(Arch::Small, HeadKind::Dueling, 8, 8, 2, 13).unwrap();
        let mut rng = Rng::seeded(2);
        let enc = encoding(&mut rng, 2, 8, 8);
        let mask = vec![true; 64];
        let map = grad_cam(&net, &enc, &mask, 5).unwrap();
        let max = map.data().iter().cloned().fold(0.0f64, f64::max);
        assert!(max == 1.0 || map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_head_gives_zero_map() {
        let mut net = QNetwork::new(Arch::Small, HeadKind::Single, 6, 6, 2, 17).unwrap();
        // zero every dense parameter: no gradient reaches the conv stack
        let n_conv = 2 * net.arch.conv_channels().len();
        for (i, p) in net.params_mut().into_iter().enumerate() {
            if i >= n_conv {
                p.fill(0.0);
            }
        }
        let mut rng = Rng::seeded(3);
        let enc = encoding(&mut rng, 2, 6, 6);
        let mask = vec![true; 36];
        let map = grad_cam(&net, &enc, &mask, 0).unwrap();
        assert!(map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_action_rejected() {
        let net = QNetwork::new(Arch::Small, HeadKind::Single, 4, 4, 2, 19).unwrap();
        let mut rng = Rng::seeded(4);
        let enc = encoding(&mut rng, 2, 4, 4);
        let mask = vec![true; 16];
        assert!(grad_cam(&net, &enc, &mask, 16).is_err());
    }
}
