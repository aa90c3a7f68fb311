import pytest
import torch

from mbtikit.data import LabeledExample, encode_examples
from mbtikit.langgen import (
    IGNORE_INDEX,
    DecodeConfig,
    LmBundle,
    LmHyperparams,
    LossTableError,
    fine_tune_for_type,
    generate,
    loss_table,
    mask_for_training,
    train_lm,
)
from mbtikit.model import EncoderConfig, init_mlm, tiny_config
from mbtikit.tokenizer import build_vocab
from mbtikit.types import all_types, parse_type

ENFJ = parse_type("ENFJ")

# Published per-type final losses used by the group-mean report check
FINAL_LOSSES = {
    "ENFJ": 0.01591, "ENFP": 0.021193, "ENTJ": 0.02907, "ENTP": 0.030716,
    "ESFJ": 0.017829, "ESFP": 0.016334, "ESTJ": 0.016708, "ESTP": 0.025886,
    "INFJ": 0.032599, "INFP": 0.028531, "INTJ": 0.028092, "INTP": 0.028124,
    "ISFJ": 0.027062, "ISFP": 0.025123, "ISTJ": 0.02662, "ISTP": 0.0239,
}


@pytest.fixture(scope="module")
def lm_setup():
    sents = [f"The cat number {i} sat on the mat today ." for i in range(50)]
    vocab = build_vocab(sents, size=200)
    cfg = tiny_config(len(vocab), case_sensitive=True)
    examples = [LabeledExample(text=s, label=ENFJ) for s in sents]
    encoded = encode_examples(examples, vocab, 32)
    return vocab, cfg, encoded


@pytest.fixture(scope="module")
def trained_bundle(lm_setup):
    vocab, cfg, encoded = lm_setup
    model = init_mlm(cfg, seed=0)
    hp = LmHyperparams(
        batch_size=16, learning_rate=2e-3, epochs=10, max_seq_len=32, seed=0
    )
    return fine_tune_for_type(ENFJ, model, encoded, vocab, hp)


class TestHyperparams:
    def test_mask_probability_bounds(self):
        with pytest.raises(ValueError):
            LmHyperparams(mask_probability=0.0)
        with pytest.raises(ValueError):
            LmHyperparams(mask_probability=1.0)

    def test_default_hyperparams(self):
        hp = LmHyperparams()
        assert hp.batch_size == 16
        assert hp.learning_rate == 3e-5
        assert hp.epochs == 10
        assert hp.max_seq_len == 128
        assert hp.warmup_proportion == 0.1


class TestMaskForTraining:
    def _batch(self, vocab, n=32, length=100):
        # non-special ids only, so selection statistics are clean
        usable = [i for i in range(len(vocab)) if i not in vocab.special_ids]
        gen = torch.Generator().manual_seed(1)
        idx = torch.randint(len(usable), (n, length), generator=gen)
        return torch.tensor(usable)[idx]

    def test_zero_probability_selects_nothing(self, lm_setup):
        vocab, _, _ = lm_setup
        ids = self._batch(vocab)
        gen = torch.Generator().manual_seed(0)
        masked, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.0, gen
        )
        assert torch.equal(masked, ids)
        assert (targets == IGNORE_INDEX).all()

    def test_binomial_selection_rate(self, lm_setup):
        # Monte-Carlo oracle: 10^4 sequences of 100 tokens at p=0.15
        # must select about 15 per sequence
        vocab, _, _ = lm_setup
        ids = self._batch(vocab, n=10_000, length=100)
        gen = torch.Generator().manual_seed(2)
        _, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.15, gen
        )
        mean_selected = (targets != IGNORE_INDEX).sum(dim=1).float().mean().item()
        assert mean_selected == pytest.approx(15.0, abs=1.0)

    def test_special_tokens_never_selected(self, lm_setup):
        vocab, _, encoded = lm_setup
        ids = torch.tensor([ex.token_ids for ex in encoded])
        gen = torch.Generator().manual_seed(3)
        masked, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.9, gen
        )
        for s in vocab.special_ids:
            positions = ids == s
            assert torch.equal(masked[positions], ids[positions])
            assert (targets[positions] == IGNORE_INDEX).all()

    def test_targets_hold_originals_only_at_selected(self, lm_setup):
        vocab, _, _ = lm_setup
        ids = self._batch(vocab)
        gen = torch.Generator().manual_seed(4)
        _, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.3, gen
        )
        selected = targets != IGNORE_INDEX
        assert torch.equal(targets[selected], ids[selected])

    def test_replacement_split_roughly_80_10_10(self, lm_setup):
        vocab, _, _ = lm_setup
        ids = self._batch(vocab, n=2000, length=100)
        gen = torch.Generator().manual_seed(5)
        masked, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.15, gen
        )
        selected = targets != IGNORE_INDEX
        n = int(selected.sum())
        frac_mask = int((masked[selected] == vocab.mask_id).sum()) / n
        frac_same = int((masked[selected] == ids[selected]).sum()) / n
        assert frac_mask == pytest.approx(0.8, abs=0.02)
        # "unchanged" includes the random draws that happen to hit the
        # original token, so allow a little slack above 0.10
        assert frac_same == pytest.approx(0.1, abs=0.02)

    def test_deterministic_under_seed(self, lm_setup):
        vocab, _, _ = lm_setup
        ids = self._batch(vocab)
        a = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.15,
            torch.Generator().manual_seed(7),
        )
        b = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.15,
            torch.Generator().manual_seed(7),
        )
        assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])


class TestTrainLm:
    def test_loss_history_length(self, trained_bundle):
        assert len(trained_bundle.per_epoch_loss) == 10
        assert trained_bundle.final_loss == trained_bundle.per_epoch_loss[-1]

    def test_overfit_loss_drops(self, trained_bundle):
        losses = trained_bundle.per_epoch_loss
        assert losses[-1] < losses[0]

    def test_losses_non_negative(self, trained_bundle):
        assert all(loss >= 0 for loss in trained_bundle.per_epoch_loss)

    def test_empty_corpus_rejected(self, lm_setup):
        vocab, cfg, _ = lm_setup
        model = init_mlm(cfg, seed=0)
        with pytest.raises(ValueError):
            train_lm(model, [], vocab, LmHyperparams())

    def test_deterministic(self, lm_setup):
        vocab, cfg, encoded = lm_setup
        hp = LmHyperparams(batch_size=16, learning_rate=1e-3, epochs=2, seed=9)
        h1 = train_lm(init_mlm(cfg, seed=9), encoded, vocab, hp)
        h2 = train_lm(init_mlm(cfg, seed=9), encoded, vocab, hp)
        assert h1 == h2


class TestGenerate:
    def test_returns_continuation(self, trained_bundle):
        out = generate(trained_bundle, "The cat sat", DecodeConfig(max_new_tokens=8))
        assert isinstance(out, str) and out

    def test_max_new_tokens_one(self, trained_bundle):
        out = generate(trained_bundle, "The cat", DecodeConfig(max_new_tokens=1))
        assert len(trained_bundle.vocab.encode_tokens(out)) <= 1

    def test_output_bounded_by_max_new_tokens(self, trained_bundle):
        for n in (1, 4, 12):
            out = generate(
                trained_bundle, "The cat sat on", DecodeConfig(max_new_tokens=n)
            )
            assert len(trained_bundle.vocab.encode_tokens(out)) <= n

    def test_deterministic_with_seed(self, trained_bundle):
        cfg = DecodeConfig(strategy="top_k_sampling", top_k=5, seed=11,
                           max_new_tokens=10)
        a = generate(trained_bundle, "The cat sat", cfg)
        b = generate(trained_bundle, "The cat sat", cfg)
        assert a == b

    def test_never_emits_reserved_tokens(self, trained_bundle):
        vocab = trained_bundle.vocab
        out = generate(
            trained_bundle, "The mat", DecodeConfig(max_new_tokens=20)
        )
        for tok in ("[PAD]", "[CLS]", "[MASK]", "[UNK]", "[SEP]"):
            assert tok not in out

    def test_long_prompt_is_tail_truncated(self, trained_bundle):
        prompt = " ".join(["The cat sat on the mat"] * 40)
        out = generate(trained_bundle, prompt, DecodeConfig(max_new_tokens=4))
        assert isinstance(out, str)

    def test_empty_prompt_rejected(self, trained_bundle):
        with pytest.raises(ValueError):
            generate(trained_bundle, "☺", DecodeConfig())

    def test_window_slides_at_capacity(self, trained_bundle):
        # request more tokens than fit in the 32-position window
        out = generate(
            trained_bundle, "The cat sat on the mat",
            DecodeConfig(max_new_tokens=45),
        )
        assert len(trained_bundle.vocab.encode_tokens(out)) <= 45


def _stub_bundle(letters: str) -> LmBundle:
    return LmBundle(
        type_label=parse_type(letters),
        model=None,
        vocab=None,
        per_epoch_loss=[FINAL_LOSSES[letters]],
    )


class TestLossTable:
    def test_published_group_means(self):
        bundles = [_stub_bundle(t.letters) for t in all_types()]
        table = loss_table(bundles)
        # arithmetic over the published per-type losses
        assert table["extrovert_mean_loss"] == pytest.approx(0.02170575, abs=1e-8)
        assert table["introvert_mean_loss"] == pytest.approx(0.027506375, abs=1e-8)
        assert table["extrovert_mean_loss"] < table["introvert_mean_loss"]

    def test_rows_in_canonical_order(self):
        bundles = [_stub_bundle(t.letters) for t in reversed(all_types())]
        table = loss_table(bundles)
        assert [code for code, _ in table["rows"]] == [t.letters for t in all_types()]

    def test_missing_bundle_rejected(self):
        bundles = [_stub_bundle(t.letters) for t in all_types()][:15]
        with pytest.raises(LossTableError):
            loss_table(bundles)

    def test_duplicate_bundle_rejected(self):
        bundles = [_stub_bundle(t.letters) for t in all_types()]
        bundles[1] = _stub_bundle("ENFJ")
        with pytest.raises(LossTableError):
            loss_table(bundles)


class TestMlmGradientCheck:
    def test_head_gradient_matches_finite_differences(self, lm_setup):
        vocab, _, encoded = lm_setup
        cfg = EncoderConfig(
            num_layers=2, hidden_size=64, num_heads=2, max_seq_len=32,
            dropout=0.0, attention_dropout=0.0, vocab_size=len(vocab),
            case_sensitive=True,
        )
        model = init_mlm(cfg, seed=6).double()
        model.eval()
        ids = torch.tensor([ex.token_ids for ex in encoded[:8]])
        mask = torch.tensor([ex.attention_mask for ex in encoded[:8]])
        gen = torch.Generator().manual_seed(6)
        masked, targets = mask_for_training(
            ids, vocab.special_ids, vocab.mask_id, len(vocab), 0.3, gen
        )
        loss_fn = torch.nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)

        logits = model(masked, mask)
        loss = loss_fn(logits.view(-1, logits.shape[-1]), targets.view(-1))
        loss.backward()
        analytic = model.head.weight.grad.clone()

        def eval_loss():
            with torch.no_grad():
                lg = model(masked, mask)
                return loss_fn(lg.view(-1, lg.shape[-1]), targets.view(-1)).item()

        h = 1e-6
        rng = torch.Generator().manual_seed(0)
        rows = torch.randint(0, analytic.shape[0], (10,), generator=rng)
        cols = torch.randint(0, analytic.shape[1], (10,), generator=rng)
        with torch.no_grad():
            for r, c in zip(rows.tolist(), cols.tolist()):
                orig = model.head.weight[r, c].item()
                model.head.weight[r, c] = orig + h
                up = eval_loss()
                model.head.weight[r, c] = orig - h
                down = eval_loss()
                model.head.weight[r, c] = orig
                fd = (up - down) / (2 * h)
                scale = max(abs(fd), abs(analytic[r, c].item()), 1e-8)
                assert abs(fd - analytic[r, c].item()) / scale <= 1e-4
