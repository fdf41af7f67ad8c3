//! Convolutional Q-networks.
//!
//! Two fixed architectures share the block layout conv -> ReLU -> 2x2 max
//! pool -> dropout. The small net stacks two blocks (16, 32 channels) and a
//! per-head dense stack of 512 and 128 units; the big net stacks three blocks
//! (32, 64, 128 channels) with dense stacks of 2048, 48 and 32 units. A
//! single head regresses all q-values directly; a dueling head emits a state
//! value plus advantages recombined as q = v + (A - mean(A)) with the mean
//! taken over unmasked actions only. Masked actions are forced to -inf after
//! head computation so they can never win a selection.

use super::layers::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DROPOUT_RATE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Small,
    Big,
}

impl Arch {
    pub fn conv_channels(&self) -> &'static [usize] {
        match self {
            Arch::Small => &[16, 32],
            Arch::Big => &[32, 64, 128],
        }
    }

    pub fn fc_widths(&self) -> &'static [usize] {
        match self {
            Arch::Small => &[512, 128],
            Arch::Big => &[2048, 48, 32],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Arch::Small),
            "big" => Ok(Arch::Big),
            other => Err(Error::config(format!("unknown architecture '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Arch::Small => "small",
            Arch::Big => "big",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    Single,
    Dueling,
}

/// Forward-pass mode: training enables dropout, keyed by an explicit seed so
/// runs replay exactly.
#[derive(Clone, Copy, Debug)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

#[derive(Clone, Debug)]
pub struct QNetwork {
    pub arch: Arch,
    pub head: HeadKind,
    pub rows: usize,
    pub cols: usize,
    pub in_channels: usize,
    conv_w: Vec<Tensor>,
    conv_b: Vec<Tensor>,
    q_w: Vec<Tensor>,
    q_b: Vec<Tensor>,
    v_w: Vec<Tensor>,
    v_b: Vec<Tensor>,
}

/// Parameter gradients, aligned with [`QNetwork::params`].
#[derive(Clone, Debug)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Gradients {
            tensors: net
                .params()
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
        }
    }

    /// grads += c * params; the L2 penalty contribution.
    pub fn add_scaled_params(&mut self, net: &QNetwork, c: f64) {
        for (g, p) in self.tensors.iter_mut().zip(net.params()) {
            for (gv, pv) in g.data_mut().iter_mut().zip(p.data()) {
                *gv += c * pv;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Cached activations from one forward pass, consumed by `backward`.
pub struct ForwardTrace {
    batch: usize,
    conv_inputs: Vec<Tensor>,
    conv_acts: Vec<Tensor>,
    pool_args: Vec<Vec<u32>>,
    pool_shapes: Vec<Vec<usize>>,
    drop_keeps: Vec<Option<Vec<bool>>>,
    q_ins: Vec<Tensor>,
    q_acts: Vec<Tensor>,
    v_ins: Vec<Tensor>,
    v_acts: Vec<Tensor>,
    mask: Vec<bool>,
}

impl QNetwork {
    pub fn new(
        arch: Arch,
        head: HeadKind,
        rows: usize,
        cols: usize,
        in_channels: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = Rng::derived(seed, 0x71E7);
        let channels = arch.conv_channels();
        let (mut h, mut w) = (rows, cols);
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        let mut prev_c = in_channels;
        for &c in channels {
            let fan_in = prev_c * 9;
            conv_w.push(Tensor::from_vec(
                vec![c, prev_c, 3, 3],
                he_uniform(fan_in, c * prev_c * 9, &mut rng),
            ));
            conv_b.push(Tensor::zeros(vec![c]));
            prev_c = c;
            h /= 2;
            w /= 2;
            if h == 0 || w == 0 {
                return Err(Error::argument(format!(
                    "grid {rows}x{cols} too small for {} pooling stages",
                    channels.len()
                )));
            }
        }
        let flat = prev_c * h * w;
        let actions = rows * cols;

        let build_stack = |rng: &mut Rng, out_dim: usize| {
            let mut ws = Vec::new();
            let mut bs = Vec::new();
            let mut prev = flat;
            for &width in arch.fc_widths() {
                ws.push(Tensor::from_vec(
                    vec![width, prev],
                    he_uniform(prev, width * prev, rng),
                ));
                bs.push(Tensor::zeros(vec![width]));
                prev = width;
            }
            ws.push(Tensor::from_vec(
                vec![out_dim, prev],
                he_uniform(prev, out_dim * prev, rng),
            ));
            bs.push(Tensor::zeros(vec![out_dim]));
            (ws, bs)
        };

        let (q_w, q_b) = build_stack(&mut rng, actions);
        let (v_w, v_b) = if head == HeadKind::Dueling {
            build_stack(&mut rng, 1)
        } else {
            (Vec::new(), Vec::new())
        };

        Ok(QNetwork {
            arch,
            head,
            rows,
            cols,
            in_channels,
            conv_w,
            conv_b,
            q_w,
            q_b,
            v_w,
            v_b,
        })
    }

    pub fn actions(&self) -> usize {
        self.rows * self.cols
    }

    /// All parameters in a stable order (conv blocks, q stack, v stack).
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.q_w.iter().zip(&self.q_b) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.v_w.iter().zip(&self.v_b) {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for (w, b) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.q_w.iter_mut().zip(self.q_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        for (w, b) in self.v_w.iter_mut().zip(self.v_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Stable parameter names matching [`Self::params`] order.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.conv_w.len() {
            out.push(format!("conv{i}.w"));
            out.push(format!("conv{i}.b"));
        }
        for i in 0..self.q_w.len() {
            out.push(format!("q{i}.w"));
            out.push(format!("q{i}.b"));
        }
        for i in 0..self.v_w.len() {
            out.push(format!("v{i}.w"));
            out.push(format!("v{i}.b"));
        }
        out
    }

    pub fn sq_param_sum(&self) -> f64 {
        self.params().iter().map(|t| t.sq_sum()).sum()
    }

    pub fn same_architecture(&self, other: &QNetwork) -> bool {
        self.arch == other.arch
            && self.head == other.head
            && self.rows == other.rows
            && self.cols == other.cols
            && self.in_channels == other.in_channels
    }

    /// Copies all parameters from `online` into `self` (the target network).
    pub fn sync_from(&mut self, online: &QNetwork) -> Result<()> {
        if !self.same_architecture(online) {
            return Err(Error::argument("architecture mismatch in target sync"));
        }
        for (dst, src) in self.params_mut().into_iter().zip(online.params()) {
            dst.copy_from(src);
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor, mask: &[bool]) -> Result<usize> {
        let shape = x.shape();
        if shape.len() != 4
            || shape[1] != self.in_channels
            || shape[2] != self.rows
            || shape[3] != self.cols
        {
            return Err(Error::argument(format!(
                "input shape {:?} does not match (B, {}, {}, {})",
                shape, self.in_channels, self.rows, self.cols
            )));
        }
        let batch = shape[0];
        if mask.len() != batch * self.actions() {
            return Err(Error::argument(format!(
                "mask length {} does not match batch {} x {} actions",
                mask.len(),
                batch,
                self.actions()
            )));
        }
        Ok(batch)
    }

    /// Forward pass returning masked q-values (shape (B, actions), -inf at
    /// masked entries) and the activation trace needed for `backward`.
    pub fn forward(&self, x: &Tensor, mask: &[bool], mode: Mode) -> Result<(Tensor, ForwardTrace)> {
        let (q, trace) = self.forward_impl(x, mask, mode, true)?;
        Ok((q, trace.expect("trace requested")))
    }

    fn forward_impl(
        &self,
        x: &Tensor,
        mask: &[bool],
        mode: Mode,
        want_trace: bool,
    ) -> Result<(Tensor, Option<ForwardTrace>)> {
        let batch = self.check_input(x, mask)?;
        let n_blocks = self.conv_w.len();

        let mut conv_inputs = Vec::with_capacity(n_blocks);
        let mut conv_acts = Vec::with_capacity(n_blocks);
        let mut pool_args = Vec::with_capacity(n_blocks);
        let mut pool_shapes = Vec::with_capacity(n_blocks);
        let mut drop_keeps = Vec::with_capacity(n_blocks);

        let mut cur = x.clone();
        for k in 0..n_blocks {
            if want_trace {
                conv_inputs.push(cur.clone());
            }
            let pre = conv2d_forward(&cur, &self.conv_w[k], &self.conv_b[k]);
            let act = relu_forward(&pre);
            if want_trace {
                pool_shapes.push(act.shape().to_vec());
            }
            let (pooled, args) = maxpool2_forward(&act);
            if want_trace {
                conv_acts.push(act);
                pool_args.push(args);
            }
            cur = match mode {
                Mode::Train { dropout_seed } => {
                    let (dropped, keep) =
                        dropout_forward(&pooled, DROPOUT_RATE, crate::rng::hash2(dropout_seed, k as u64));
                    if want_trace {
                        drop_keeps.push(Some(keep));
                    }
                    dropped
                }
                Mode::Eval => {
                    if want_trace {
                        drop_keeps.push(None);
                    }
                    pooled
                }
            };
        }

        let flat_len = cur.numel() / batch;
        let flat = Tensor::from_vec(vec![batch, flat_len], cur.data().to_vec());

        let run_stack = |ws: &[Tensor], bs: &[Tensor], input: &Tensor| {
            let mut ins = Vec::new();
            let mut acts = Vec::new();
            let mut cur = input.clone();
            let last = ws.len() - 1;
            for (i, (w, b)) in ws.iter().zip(bs).enumerate() {
                if want_trace {
                    ins.push(cur.clone());
                }
                let pre = dense_forward(&cur, w, b);
                cur = if i < last {
                    let act = relu_forward(&pre);
                    if want_trace {
                        acts.push(act.clone());
                    }
                    act
                } else {
                    pre
                };
            }
            (cur, ins, acts)
        };

        let (raw_q, q_ins, q_acts) = run_stack(&self.q_w, &self.q_b, &flat);
        let (raw_v, v_ins, v_acts) = if self.head == HeadKind::Dueling {
            let (v, ins, acts) = run_stack(&self.v_w, &self.v_b, &flat);
            (Some(v), ins, acts)
        } else {
            (None, Vec::new(), Vec::new())
        };

        let actions = self.actions();
        let mut q = Tensor::zeros(vec![batch, actions]);
        for b in 0..batch {
            let row_mask = &mask[b * actions..(b + 1) * actions];
            let raw_row = &raw_q.data()[b * actions..(b + 1) * actions];
            let out_row = &mut q.data_mut()[b * actions..(b + 1) * actions];
            match self.head {
                HeadKind::Single => {
                    for a in 0..actions {
                        out_row[a] = if row_mask[a] { raw_row[a] } else { f64::NEG_INFINITY };
                    }
                }
                HeadKind::Dueling => {
                    let unmasked = row_mask.iter().filter(|&&m| m).count();
                    if unmasked == 0 {
                        return Err(Error::argument(format!(
                            "state {b} of batch has no unmasked action"
                        )));
                    }
                    let mean_adv = raw_row
                        .iter()
                        .zip(row_mask)
                        .filter(|(_, &m)| m)
                        .map(|(&a, _)| a)
                        .sum::<f64>()
                        / unmasked as f64;
                    let v = raw_v.as_ref().unwrap().data()[b];
                    for a in 0..actions {
                        out_row[a] = if row_mask[a] {
                            v + raw_row[a] - mean_adv
                        } else {
                            f64::NEG_INFINITY
                        };
                    }
                }
            }
        }

        let trace = if want_trace {
            Some(ForwardTrace {
                batch,
                conv_inputs,
                conv_acts,
                pool_args,
                pool_shapes,
                drop_keeps,
                q_ins,
                q_acts,
                v_ins,
                v_acts,
                mask: mask.to_vec(),
            })
        } else {
            None
        };
        Ok((q, trace))
    }

    /// Dropout-free forward pass without trace bookkeeping.
    pub fn infer(&self, x: &Tensor, mask: &[bool]) -> Result<Tensor> {
        self.forward_impl(x, mask, Mode::Eval, false).map(|(q, _)| q)
    }

    /// Value-head output for dueling networks (`None` for single heads),
    /// dropout-free.
    pub fn infer_value(&self, x: &Tensor, mask: &[bool]) -> Result<Option<Vec<f64>>> {
        if self.head != HeadKind::Dueling {
            return Ok(None);
        }
        let (_, trace) = self.forward_impl(x, mask, Mode::Eval, true)?;
        let trace = trace.expect("trace requested");
        // rerun just the value stack head output from the cached inputs
        let last = self.v_w.len() - 1;
        let out = dense_forward(&trace.v_ins[last], &self.v_w[last], &self.v_b[last]);
        Ok(Some(out.data().to_vec()))
    }

    /// Reverse-mode pass from dLoss/dq. Gradients at masked entries must be
    /// zero (they are selection sentinels, not differentiable outputs).
    /// Returns parameter gradients and the gradient with respect to the last
    /// conv block's post-ReLU activations (the attention-map input).
    pub fn backward(&self, trace: &ForwardTrace, grad_q: &Tensor) -> (Gradients, Tensor) {
        let batch = trace.batch;
        let actions = self.actions();
        assert_eq!(grad_q.shape(), &[batch, actions], "grad shape mismatch");

        // split the head gradient
        let mut g_adv = Tensor::zeros(vec![batch, actions]);
        let mut g_val = Tensor::zeros(vec![batch, 1]);
        for b in 0..batch {
            let row_mask = &trace.mask[b * actions..(b + 1) * actions];
            let g_row = &grad_q.data()[b * actions..(b + 1) * actions];
            match self.head {
                HeadKind::Single => {
                    let out = &mut g_adv.data_mut()[b * actions..(b + 1) * actions];
                    for a in 0..actions {
                        if row_mask[a] {
                            out[a] = g_row[a];
                        }
                    }
                }
                HeadKind::Dueling => {
                    let unmasked = row_mask.iter().filter(|&&m| m).count().max(1);
                    let sum_g: f64 = g_row
                        .iter()
                        .zip(row_mask)
                        .filter(|(_, &m)| m)
                        .map(|(&g, _)| g)
                        .sum();
                    let correction = sum_g / unmasked as f64;
                    let out = &mut g_adv.data_mut()[b * actions..(b + 1) * actions];
                    for a in 0..actions {
                        if row_mask[a] {
                            out[a] = g_row[a] - correction;
                        }
                    }
                    g_val.data_mut()[b] = sum_g;
                }
            }
        }

        let mut grads: Vec<Tensor> = Vec::new();

        let back_stack = |ws: &[Tensor],
                          ins: &[Tensor],
                          acts: &[Tensor],
                          g_out: Tensor|
         -> (Vec<(Tensor, Tensor)>, Tensor) {
            let mut param_grads = vec![(Tensor::zeros(vec![1]), Tensor::zeros(vec![1])); ws.len()];
            let mut g = g_out;
            for i in (0..ws.len()).rev() {
                if i < ws.len() - 1 {
                    g = relu_backward(&acts[i], &g);
                }
                let (gx, gw, gb) = dense_backward(&ins[i], &ws[i], &g);
                param_grads[i] = (gw, gb);
                g = gx;
            }
            (param_grads, g)
        };

        let (q_grads, g_flat_q) = back_stack(&self.q_w, &trace.q_ins, &trace.q_acts, g_adv);
        let (v_grads, g_flat_v) = if self.head == HeadKind::Dueling {
            let (g, flat) = back_stack(&self.v_w, &trace.v_ins, &trace.v_acts, g_val);
            (g, Some(flat))
        } else {
            (Vec::new(), None)
        };

        let mut g_flat = g_flat_q;
        if let Some(extra) = g_flat_v {
            for (a, b) in g_flat.data_mut().iter_mut().zip(extra.data()) {
                *a += b;
            }
        }

        // back through conv blocks
        let n_blocks = self.conv_w.len();
        let mut conv_grads: Vec<(Tensor, Tensor)> = Vec::with_capacity(n_blocks);
        let last_pool_shape = {
            let s = &trace.pool_shapes[n_blocks - 1];
            vec![s[0], s[1], s[2] / 2, s[3] / 2]
        };
        let mut g_cur = Tensor::from_vec(last_pool_shape, g_flat.data().to_vec());
        let mut grad_last_conv_act = Tensor::zeros(vec![1]);
        for k in (0..n_blocks).rev() {
            if let Some(keep) = &trace.drop_keeps[k] {
                g_cur = dropout_backward(keep, DROPOUT_RATE, &g_cur);
            }
            let g_act = maxpool2_backward(&trace.pool_args[k], &trace.pool_shapes[k], &g_cur);
            if k == n_blocks - 1 {
                grad_last_conv_act = g_act.clone();
            }
            let g_pre = relu_backward(&trace.conv_acts[k], &g_act);
            let (gx, gw, gb) = conv2d_backward(&trace.conv_inputs[k], &self.conv_w[k], &g_pre);
            conv_grads.push((gw, gb));
            g_cur = gx; // shape already matches block k-1's dropout output
        }
        conv_grads.reverse();

        for (gw, gb) in conv_grads {
            grads.push(gw);
            grads.push(gb);
        }
        for (gw, gb) in q_grads {
            grads.push(gw);
            grads.push(gb);
        }
        for (gw, gb) in v_grads {
            grads.push(gw);
            grads.push(gb);
        }

        (Gradients { tensors: grads }, grad_last_conv_act)
    }

    /// Post-ReLU feature maps of the last conv block for a single encoded
    /// state, along with their spatial dims. Used by the attention maps.
    pub fn last_conv_activations<'t>(&self, trace: &'t ForwardTrace) -> &'t Tensor {
        trace.conv_acts.last().expect("network has conv blocks")
    }
}

/// Greedy action over a masked q-row: the smallest index attaining the max.
pub fn argmax_row(q_row: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in q_row.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_net(head: HeadKind) -> QNetwork {
        QNetwork::new(Arch::Small, head, 4, 4, 2, 99).unwrap()
    }

    fn rand_input(rng: &mut Rng, b: usize, c: usize, r: usize, cc: usize) -> Tensor {
        Tensor::from_vec(
            vec![b, c, r, cc],
            (0..b * c * r * cc).map(|_| rng.next_range(-1.0, 1.0)).collect(),
        )
    }

    #[test]
    fn output_shape_and_masking() {
        let net = tiny_net(HeadKind::Single);
        let mut rng = Rng::seeded(1);
        let x = rand_input(&mut rng, 3, 2, 4, 4);
        let mut mask = vec![true; 3 * 16];
        mask[0] = false;
        mask[16 + 5] = false;
        let q = net.infer(&x, &mask).unwrap();
        assert_eq!(q.shape(), &[3, 16]);
        assert_eq!(q.data()[0], f64::NEG_INFINITY);
        assert_eq!(q.data()[16 + 5], f64::NEG_INFINITY);
        // masked entry never wins the argmax
        for b in 0..3 {
            let row = &q.data()[b * 16..(b + 1) * 16];
            let a = argmax_row(row);
            assert!(mask[b * 16 + a]);
        }
    }

    #[test]
    fn eval_forward_is_pure() {
        let net = tiny_net(HeadKind::Dueling);
        let mut rng = Rng::seeded(2);
        let x = rand_input(&mut rng, 2, 2, 4, 4);
        let mask = vec![true; 32];
        let a = net.infer(&x, &mask).unwrap();
        let b = net.infer(&x, &mask).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn dueling_identity_mean_centered() {
        let net = tiny_net(HeadKind::Dueling);
        let mut rng = Rng::seeded(3);
        for trial in 0..100 {
            let x = rand_input(&mut rng, 1, 2, 4, 4);
            let mut mask = vec![true; 16];
            // random partial masking, at least one left
            for m in mask.iter_mut() {
                if rng.next_f64() < 0.3 {
                    *m = false;
                }
            }
            if !mask.iter().any(|&m| m) {
                mask[0] = true;
            }
            let q = net.infer(&x, &mask).unwrap();
            // recompute v by rerunning with a fresh trace: v = mean of q over unmasked
            // must equal v(s); equivalently mean(q - v) over unmasked = 0, i.e.
            // mean(A - meanA) = 0.
            let unmasked: Vec<usize> = (0..16).filter(|&a| mask[a]).collect();
            let mean_q: f64 =
                unmasked.iter().map(|&a| q.data()[a]).sum::<f64>() / unmasked.len() as f64;
            // mean over unmasked of (q - v) = mean_q - v = 0 <=> mean_q = v.
            // Check via the dueling recombination directly: centering makes the
            // unmasked advantage residuals sum to zero.
            let residual: f64 = unmasked.iter().map(|&a| q.data()[a] - mean_q).sum();
            assert!(residual.abs() < 1e-6, "trial {trial}: residual {residual}");
        }
    }

    #[test]
    fn dueling_hand_example() {
        // v = 1, A = [2, 0], both unmasked -> q = [2, 0]
        // constructed indirectly: meanA = 1, q = v + A - meanA
        let v = 1.0;
        let adv = [2.0, 0.0];
        let mean = (adv[0] + adv[1]) / 2.0;
        let q: Vec<f64> = adv.iter().map(|a| v + a - mean).collect();
        assert_eq!(q, vec![2.0, 0.0]);
    }

    #[test]
    fn dueling_equal_advantages_collapse_to_value() {
        // Zeroing the advantage output layer makes all advantages equal, so
        // every unmasked q entry equals v(s).
        let mut net = tiny_net(HeadKind::Dueling);
        let adv_out = net.q_w.len() - 1;
        net.q_w[adv_out].fill(0.0);
        net.q_b[adv_out].fill(0.0);
        let mut rng = Rng::seeded(5);
        let x = rand_input(&mut rng, 1, 2, 4, 4);
        let mut mask = vec![true; 16];
        mask[2] = false;
        let q = net.infer(&x, &mask).unwrap();
        let first = q.data()[0];
        for (&qv, &m) in q.data().iter().zip(&mask) {
            if m {
                assert!((qv - first).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sync_target_copies_bitwise_and_detaches() {
        let online = tiny_net(HeadKind::Single);
        let mut target = QNetwork::new(Arch::Small, HeadKind::Single, 4, 4, 2, 123).unwrap();
        target.sync_from(&online).unwrap();
        let mut rng = Rng::seeded(6);
        let x = rand_input(&mut rng, 1, 2, 4, 4);
        let mask = vec![true; 16];
        assert_eq!(
            online.infer(&x, &mask).unwrap().data(),
            target.infer(&x, &mask).unwrap().data()
        );
        // modifying online afterwards leaves target unchanged
        let mut online = online;
        online.params_mut()[0].data_mut()[0] += 1.0;
        assert_ne!(
            online.infer(&x, &mask).unwrap().data(),
            target.infer(&x, &mask).unwrap().data()
        );
    }

    #[test]
    fn sync_rejects_architecture_mismatch() {
        let a = tiny_net(HeadKind::Single);
        let mut b = QNetwork::new(Arch::Small, HeadKind::Dueling, 4, 4, 2, 1).unwrap();
        assert!(b.sync_from(&a).is_err());
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let net = tiny_net(HeadKind::Single);
        let mut rng = Rng::seeded(7);
        let x = rand_input(&mut rng, 1, 2, 4, 4);
        let mask = vec![true; 16];
        let eval = net.infer(&x, &mask).unwrap();
        let (train_q, _) = net
            .forward(&x, &mask, Mode::Train { dropout_seed: 5 })
            .unwrap();
        // dropout at rate 0.1 on conv features essentially always perturbs
        assert_ne!(eval.data(), train_q.data());
        // same dropout seed replays exactly
        let (train_q2, _) = net
            .forward(&x, &mask, Mode::Train { dropout_seed: 5 })
            .unwrap();
        assert_eq!(train_q.data(), train_q2.data());
    }

    #[test]
    fn gradient_zero_loss_gives_zero_grads() {
        let net = tiny_net(HeadKind::Dueling);
        let mut rng = Rng::seeded(8);
        let x = rand_input(&mut rng, 2, 2, 4, 4);
        let mask = vec![true; 32];
        let (_, trace) = net.forward(&x, &mask, Mode::Eval).unwrap();
        let gq = Tensor::zeros(vec![2, 16]);
        let (grads, _) = net.backward(&trace, &gq);
        assert_eq!(grads.max_abs(), 0.0);
    }

    fn fd_check_network(net: &QNetwork, batch: usize, tol: f64, samples_per_tensor: usize) {
        let mut rng = Rng::seeded(1234);
        let x = rand_input(&mut rng, batch, net.in_channels, net.rows, net.cols);
        let actions = net.actions();
        let mut mask = vec![true; batch * actions];
        mask[1] = false; // exercise masked path

        // loss = sum over batch of q at a fixed unmasked action
        let probe_action = 3usize.min(actions - 1);
        let loss_of = |n: &QNetwork| -> f64 {
            let q = n.infer(&x, &mask).unwrap();
            (0..batch).map(|b| q.data()[b * actions + probe_action]).sum()
        };

        let (_, trace) = net.forward(&x, &mask, Mode::Eval).unwrap();
        let mut gq = Tensor::zeros(vec![batch, actions]);
        for b in 0..batch {
            gq.data_mut()[b * actions + probe_action] = 1.0;
        }
        let (grads, _) = net.backward(&trace, &gq);

        let mut net = net.clone();
        let h = 1e-4;
        let n_tensors = net.params().len();
        for ti in 0..n_tensors {
            let len = net.params()[ti].numel();
            let step = (len / samples_per_tensor).max(1);
            let mut checked = 0;
            let mut pi = 0;
            while pi < len && checked < samples_per_tensor {
                let orig = net.params()[ti].data()[pi];
                net.params_mut()[ti].data_mut()[pi] = orig + h;
                let up = loss_of(&net);
                net.params_mut()[ti].data_mut()[pi] = orig - h;
                let down = loss_of(&net);
                net.params_mut()[ti].data_mut()[pi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.tensors[ti].data()[pi];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    ((analytic - numeric) / denom).abs() < tol,
                    "tensor {ti} param {pi}: analytic {analytic} vs numeric {numeric}"
                );
                pi += step;
                checked += 1;
            }
        }
    }

    #[test]
    fn finite_difference_small_single() {
        let net = QNetwork::new(Arch::Small, HeadKind::Single, 4, 4, 2, 42).unwrap();
        fd_check_network(&net, 2, 1e-3, 12);
    }

    #[test]
    fn finite_difference_small_dueling() {
        let net = QNetwork::new(Arch::Small, HeadKind::Dueling, 4, 4, 2, 43).unwrap();
        fd_check_network(&net, 2, 1e-3, 12);
    }

    #[test]
    fn finite_difference_big_dueling() {
        let net = QNetwork::new(Arch::Big, HeadKind::Dueling, 8, 8, 2, 44).unwrap();
        fd_check_network(&net, 1, 1e-3, 6);
    }

    #[test]
    fn backward_without_matching_forward_panics() {
        let net = tiny_net(HeadKind::Single);
        let mut rng = Rng::seeded(9);
        let x = rand_input(&mut rng, 1, 2, 4, 4);
        let mask = vec![true; 16];
        let (_, trace) = net.forward(&x, &mask, Mode::Eval).unwrap();
        let bad_gq = Tensor::zeros(vec![2, 16]);
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            net.backward(&trace, &bad_gq)
        }));
        assert!(res.is_err());
    }
}
