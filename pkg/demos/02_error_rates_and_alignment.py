"""
Error rates, alignments and timestamp accuracy
==============================================
"""

from asrx.grammar import TimedToken, parse_timed_transcript
from asrx.metrics import aas, cer, classification_accuracy, edit_alignment, mer, tokenize_mixed, wer

# The alignment underneath every rate; ties resolve Match > Sub > Del > Ins.
al = edit_alignment(list("播放小梦想大梦想"), list("播放小梦想"))
print("cost", al.cost, [op.kind for op in al.ops])

# CER on Chinese, WER on English, MER on code-switched speech.
print("CER", cer("播放小梦想大梦想", "播放小梦想").rate)
print("WER", wer("the cat sat", "the cat").rate)
print("mixed tokens", tokenize_mixed("播放hello世界"))
print("MER", mer("播放hello", "播放 hullo").rate)

# Timestamp accuracy: tokens are paired by text, then each pair contributes
# the mean of its start and end offsets.
ref = parse_timed_transcript("<0.21>父<0.47> <0.46>母<0.60> <0.60>的<0.73>")
late = [TimedToken(t.token, t.start + 0.05, t.end + 0.05) for t in ref]
print("AAS (ms)", aas(ref, late).mean_shift_ms)
print("with a dropped token", aas(ref, late[:1] + late[2:]))

# Classification accuracy with unparseable outputs counted as misses.
cm = classification_accuracy(
    [("male", "male"), ("female", "male"), ("female", None), ("male", ("文本", "male"))],
    ("female", "male"),
)
print("ACC", cm.accuracy, "per class", cm.per_class_accuracy())
print(cm.counts, "unparseable per class", cm.unparseable)
