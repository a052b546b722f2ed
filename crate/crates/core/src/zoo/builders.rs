//! The three tabulated architectures. Each node whose output corresponds to
//! a row of its architecture table carries that row label, so a shape trace
//! can be read back and compared cell by cell.

use super::graph::{Architecture, GraphBuilder, LayerKind, NetworkGraph};
use crate::engine::Padding;
use crate::error::{Error, Result};

const DROPOUT_RATE: f64 = 0.5;

fn check(input_channels: usize, class_count: usize) -> Result<()> {
    if input_channels == 0 {
        return Err(Error::InvalidArgument("input channel count must be at least 1".into()));
    }
    if class_count < 2 {
        return Err(Error::InvalidArgument(format!("class count {class_count} < 2")));
    }
    Ok(())
}

/// `Flatten + FC + SoftMax` head; the softmax node carries `row`.
fn classifier(b: &mut GraphBuilder, from: usize, class_count: usize, row: &'static str, flatten: bool) -> Result<usize> {
    let flat = if flatten {
        b.unary("flatten", LayerKind::Flatten, from)?
    } else {
        from
    };
    let fc = b.unary("fc", LayerKind::Dense { units: class_count }, flat)?;
    let out = b.unary("softmax", LayerKind::Softmax, fc)?;
    Ok(b.tag(out, row))
}

/// Wide contextual residual network on `5 x 5 x C` patches.
pub fn build_wcrn(input_channels: usize, class_count: usize) -> Result<NetworkGraph> {
    check(input_channels, class_count)?;
    let mut b = GraphBuilder::new(Architecture::Wcrn, [5, 5, input_channels]);
    let x = b.input();

    let c1a = b.conv("conv1a", x, 1, 64, Padding::Valid)?;
    b.tag(c1a, "1a");
    let c1b = b.conv("conv1b", x, 3, 64, Padding::Valid)?;
    b.tag(c1b, "1b");
    let p2a = b.unary("pool2a", LayerKind::MaxPool { window: 5 }, c1a)?;
    b.tag(p2a, "2a");
    let p2b = b.unary("pool2b", LayerKind::MaxPool { window: 3 }, c1b)?;
    b.tag(p2b, "2b");
    let cat3 = b.push("concat3", LayerKind::Concat, &[p2a, p2b])?;
    b.tag(cat3, "3");

    let bn4 = b.unary("bn4", LayerKind::BatchNorm, cat3)?;
    let r4 = b.unary("relu4", LayerKind::Relu, bn4)?;
    let c4 = b.conv("conv4", r4, 1, 128, Padding::Valid)?;
    b.tag(c4, "4");
    let bn5 = b.unary("bn5", LayerKind::BatchNorm, c4)?;
    let r5 = b.unary("relu5", LayerKind::Relu, bn5)?;
    let c5 = b.conv("conv5", r5, 1, 128, Padding::Valid)?;
    b.tag(c5, "5");
    let add6 = b.push("add6", LayerKind::Add, &[cat3, c5])?;
    b.tag(add6, "6");

    classifier(&mut b, add6, class_count, "7", true)?;
    b.finish(class_count)
}

/// Deep contextual CNN on `5 x 5 x C` patches.
pub fn build_dccnn(input_channels: usize, class_count: usize) -> Result<NetworkGraph> {
    check(input_channels, class_count)?;
    let mut b = GraphBuilder::new(Architecture::Dccnn, [5, 5, input_channels]);
    let x = b.input();

    let c1a = b.conv("conv1a", x, 1, 128, Padding::Valid)?;
    b.tag(c1a, "1a");
    let c1b = b.conv("conv1b", x, 3, 128, Padding::Valid)?;
    b.tag(c1b, "1b");
    let c1c = b.conv("conv1c", x, 5, 128, Padding::Valid)?;
    b.tag(c1c, "1c");
    let p2a = b.unary("pool2a", LayerKind::MaxPool { window: 5 }, c1a)?;
    b.tag(p2a, "2a");
    let p2b = b.unary("pool2b", LayerKind::MaxPool { window: 3 }, c1b)?;
    b.tag(p2b, "2b");
    let cat3 = b.push("concat3", LayerKind::Concat, &[p2a, p2b, c1c])?;
    b.tag(cat3, "3");

    let r4 = b.unary("relu4", LayerKind::Relu, cat3)?;
    let bn4 = b.unary("bn4", LayerKind::BatchNorm, r4)?;
    let c4 = b.conv("conv4", bn4, 1, 128, Padding::Valid)?;
    b.tag(c4, "4");
    let r5 = b.unary("relu5", LayerKind::Relu, c4)?;
    let bn5 = b.unary("bn5", LayerKind::BatchNorm, r5)?;
    let c5 = b.conv("conv5", bn5, 1, 128, Padding::Valid)?;
    b.tag(c5, "5");
    let r6 = b.unary("relu6", LayerKind::Relu, c5)?;
    let c6 = b.conv("conv6", r6, 1, 128, Padding::Valid)?;
    b.tag(c6, "6");
    let add7 = b.push("add7", LayerKind::Add, &[c4, c6])?;
    b.tag(add7, "7");

    let r8 = b.unary("relu8", LayerKind::Relu, add7)?;
    let c8 = b.conv("conv8", r8, 1, 128, Padding::Valid)?;
    b.tag(c8, "8");
    let r9 = b.unary("relu9", LayerKind::Relu, c8)?;
    let c9 = b.conv("conv9", r9, 1, 128, Padding::Valid)?;
    b.tag(c9, "9");
    let add10 = b.push("add10", LayerKind::Add, &[add7, c9])?;
    b.tag(add10, "10");

    let r11 = b.unary("relu11a", LayerKind::Relu, add10)?;
    let c11 = b.conv("conv11", r11, 1, 128, Padding::Valid)?;
    let r11b = b.unary("relu11b", LayerKind::Relu, c11)?;
    let d11 = b.unary("dropout11", LayerKind::Dropout { rate: DROPOUT_RATE }, r11b)?;
    b.tag(d11, "11");

    let c12a = b.conv("conv12a", d11, 1, 128, Padding::Valid)?;
    let r12 = b.unary("relu12", LayerKind::Relu, c12a)?;
    let d12 = b.unary("dropout12", LayerKind::Dropout { rate: DROPOUT_RATE }, r12)?;
    let c12b = b.conv("conv12b", d12, 1, 128, Padding::Valid)?;
    b.tag(c12b, "12");

    classifier(&mut b, c12b, class_count, "13", true)?;
    b.finish(class_count)
}

/// Hybrid residual network on `7 x 7 x C` patches.
pub fn build_hresnet(input_channels: usize, class_count: usize) -> Result<NetworkGraph> {
    check(input_channels, class_count)?;
    let mut b = GraphBuilder::new(Architecture::Hresnet, [7, 7, input_channels]);
    let x = b.input();

    let c1 = b.conv("conv1", x, 3, 64, Padding::Same)?;
    b.tag(c1, "1");
    let bn2 = b.unary("bn2", LayerKind::BatchNorm, c1)?;
    let r2 = b.unary("relu2", LayerKind::Relu, bn2)?;
    let c2 = b.conv("conv2", r2, 3, 64, Padding::Same)?;
    b.tag(c2, "2");
    let r3 = b.unary("relu3", LayerKind::Relu, c2)?;
    let c3 = b.conv("conv3", r3, 3, 64, Padding::Same)?;
    b.tag(c3, "3");
    let add4 = b.push("add4", LayerKind::Add, &[c1, c3])?;
    b.tag(add4, "4");
    let gap5 = b.unary("gap5", LayerKind::GlobalAvgPool, add4)?;
    b.tag(gap5, "5");

    classifier(&mut b, gap5, class_count, "6", false)?;
    b.finish(class_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wcrn_trainable_count_matches_hand_tally() {
        let (c, k) = (6, 11);
        let conv = |p: usize, m: usize, f: usize| p * p * m * f + f;
        let bn = |ch: usize| 2 * ch;
        let want = conv(1, c, 64) + conv(3, c, 64) + bn(128) + conv(1, 128, 128) + bn(128) + conv(1, 128, 128) + (128 * k + k);
        assert_eq!(want, 38_923);
        assert_eq!(build_wcrn(c, k).unwrap().trainable_parameter_count(), want);
    }

    #[test]
    fn hresnet_trainable_count_matches_hand_tally() {
        let (c, k) = (6, 11);
        let conv = |p: usize, m: usize, f: usize| p * p * m * f + f;
        let want = conv(3, c, 64) + 2 * 64 + conv(3, 64, 64) + conv(3, 64, 64) + (64 * k + k);
        assert_eq!(want, 78_219);
        assert_eq!(build_hresnet(c, k).unwrap().trainable_parameter_count(), want);
    }

    #[test]
    fn dccnn_trainable_count_matches_hand_tally() {
        let (c, k) = (6, 11);
        let conv = |p: usize, m: usize, f: usize| p * p * m * f + f;
        let want = conv(1, c, 128)
            + conv(3, c, 128)
            + conv(5, c, 128)
            + 2 * 384
            + conv(1, 384, 128)
            + 2 * 128
            + 7 * conv(1, 128, 128)
            + (128 * k + k);
        assert_eq!(build_dccnn(c, k).unwrap().trainable_parameter_count(), want);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(build_wcrn(0, 3).is_err());
        assert!(build_hresnet(3, 1).is_err());
    }

    #[test]
    fn terminal_layer_is_class_softmax() {
        for arch in [Architecture::Wcrn, Architecture::Dccnn, Architecture::Hresnet] {
            let g = arch.build(4, 7).unwrap();
            assert_eq!(g.output_shape(g.output()), &[7]);
            assert_eq!(g.nodes()[g.output()].kind, LayerKind::Softmax);
        }
    }
}
