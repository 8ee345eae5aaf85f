"""
A sequence VAE that proposes new equation structures
====================================================
"""

# %%
from lbp_discovery.expr import load_corpus, validate
from lbp_discovery.vae.model import VaeConfig, reconstruct, sample, train, uve

corpus = load_corpus()
print(len(corpus), "training structures, e.g.", corpus[2])

# %%
# A small model trains in well under a minute on one core.
cfg = VaeConfig(enc_hidden=32, dec_hidden=64, optimizer="Adam", max_epochs=40)
model, report = train(cfg, corpus)
print("best epoch:", report.early_stop_epoch, "total loss:", round(report.total[report.early_stop_epoch - 1], 3))
print("unseen valid structures in 100 samples:", report.uve)

# %%
samples = sample(model, 10, seed=3, temperature=1.0)
for s in samples:
    print("valid" if validate(s) else "     ", "new" if s not in corpus else "   ", s)
print("UVE:", uve(samples, set(corpus)))
print("reconstruction of", repr(corpus[0]), "->", repr(reconstruct(model, corpus[0])))
