"""Regenerates train/valid/test.txt from the two family trees."""
import random
fams = [
 dict(couples=[("Christopher","Penelope"),("Andrew","Christine"),("Arthur","Margaret"),("James","Victoria"),("Charles","Jennifer")],
      kids={("Christopher","Penelope"):["Arthur","Victoria"],("Andrew","Christine"):["James","Jennifer"],("James","Victoria"):["Colin","Charlotte"]}),
 dict(couples=[("Roberto","Maria"),("Pierro","Francesca"),("Emilio","Gina"),("Marco","Lucia"),("Tomaso","Angela")],
      kids={("Roberto","Maria"):["Emilio","Lucia"],("Pierro","Francesca"):["Marco","Angela"],("Marco","Lucia"):["Alfonso","Sophia"]}),
]
male={"Christopher","Andrew","Arthur","James","Charles","Colin","Roberto","Pierro","Emilio","Marco","Tomaso","Alfonso"}
facts=[]
for f in fams:
    spouse={}
    for h,w in f["couples"]:
        facts.append((w,"isWifeOf",h)); facts.append((h,"isHusbandOf",w)); spouse[h]=w; spouse[w]=h
    parents={}
    for (fa,mo),ks in f["kids"].items():
        for k in ks:
            parents[k]=(fa,mo)
            facts.append((fa,"isFatherOf",k)); facts.append((mo,"isMotherOf",k))
            facts.append((k,"isSonOf" if k in male else "isDaughterOf",fa))
            facts.append((k,"isSonOf" if k in male else "isDaughterOf",mo))
        for a in ks:
            for b in ks:
                if a!=b: facts.append((a,"isBrotherOf" if a in male else "isSisterOf",b))
    # uncles/aunts: siblings of parents and their spouses
    sib={}
    for ks in f["kids"].values():
        for a in ks: sib[a]=[b for b in ks if b!=a]
    for k,(fa,mo) in parents.items():
        for p in (fa,mo):
            for s in sib.get(p,[]):
                for u in (s, spouse.get(s)):
                    if u is None or u in (fa,mo): continue
                    facts.append((u,"isUncleOf" if u in male else "isAuntOf",k))
                    facts.append((k,"isNephewOf" if k in male else "isNieceOf",u))
assert len(set(facts))==len(facts)
print(len(facts))
rng=random.Random(20211)
while True:
    fs=sorted(facts); rng.shuffle(fs)
    test,valid,train=fs[:12],fs[12:24],fs[24:]
    ents={x for h,_,t in train for x in (h,t)}; rels={r for _,r,_ in train}
    if len(ents)==24 and len(rels)==12: break
import os
here=os.path.dirname(os.path.abspath(__file__))
for name,sp in (("train",train),("valid",valid),("test",test)):
    open(os.path.join(here,f"{name}.txt"),"w").write("".join(f"{h}\t{r}\t{t}\n" for h,r,t in sp))
from collections import Counter
print(Counter(r for _,r,_ in facts)); print(Counter(r for _,r,_ in test))
