use crate::airlink::RxFrame;
use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::detector::{run_on_support, ChannelEstimate, ReceiverOptions};
use crate::error::Result;
use crate::modem::TrainingSequence;

/// True support indices `k L + l_k` of the active terminals.
pub fn true_support(truth: &ChannelRealization, cfg: &SystemConfig) -> Vec<usize> {
    let mut support: Vec<usize> = truth
        .active_profiles()
        .map(|p| p.id * cfg.delay_span + p.delay)
        .collect();
    support.sort_unstable();
    support
}

/// Lower bound receiver: the parametric stage on the true support.
pub fn oracle_ls(
    rx: &RxFrame,
    truth: &ChannelRealization,
    ts_list: &[TrainingSequence],
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<ChannelEstimate> {
    run_on_support(rx, ts_list, &true_support(truth, cfg), cfg, opts)
}
