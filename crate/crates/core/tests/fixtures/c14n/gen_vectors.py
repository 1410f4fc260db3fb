#!/usr/bin/env python3
"""Regenerates the exclusive-c14n golden vectors with lxml (libxml2).

Each vector NN-name consists of:
  NN-name.xml    input document
  NN-name.args   line 1: element-child index path from the root ("" = root),
                 line 2: space separated InclusiveNamespaces prefixes
  NN-name.c14n   expected canonical octets

libxml2 does not render an inclusive "#default" namespace, so that case is
covered by a unit test instead of a golden vector.
"""
from lxml import etree

SOAP = "http://www.w3.org/2003/05/soap-envelope"
VECTORS = [
    ("01-attr-order", b'<e b="2" a="1"/>', "", []),
    ("02-unused-ns-dropped", b'<x:e xmlns:x="urn:u" xmlns:y="urn:v"/>', "", []),
    ("03-ancestor-prefix", b'<r xmlns:p="urn:p" xmlns:q="urn:q"><p:c q:a="1"><p:d/></p:c></r>', "0", []),
    ("04-default-ns-subtree", b'<r xmlns="urn:d"><a><b/></a></r>', "0", []),
    ("05-undeclare-default", b'<r xmlns="urn:d"><a xmlns=""><b/></a></r>', "0", []),
    ("06-escape-text", b'<e>a &amp; b &lt; c &gt; d "q" \'s\' &#13;</e>', "", []),
    ("07-escape-attr", b'<e a="x&#9;y&#10;z&#13;w &lt; &amp; &quot; &gt; \'"/>', "", []),
    ("08-cdata", b'<e><![CDATA[<b>&x]]></e>', "", []),
    ("09-comments-removed", b'<e><!-- c --><f/><!-- d --></e>', "", []),
    ("10-empty-element", b'<a><b></b><c/></a>', "", []),
    ("11-ns-attr-sort", b'<e xmlns:b="urn:b" xmlns:a="urn:z" z="0" b:x="1" a:x="2" a:a="3" y="4"/>', "", []),
    ("12-inclusive-prefix", b'<r xmlns:p="urn:p" xmlns:q="urn:q"><c/></r>', "0", ["q"]),
    ("14-redundant-redeclare", b'<p:a xmlns:p="urn:p"><p:b xmlns:p="urn:p"><p:c/></p:b></p:a>', "", []),
    ("15-rebind-prefix", b'<p:a xmlns:p="urn:1"><p:b xmlns:p="urn:2"/><p:c/></p:a>', "", []),
    ("16-prefix-used-only-by-attr", b'<r xmlns:w="urn:w"><e w:Id="x1"><f/></e></r>', "0", []),
    ("17-whitespace-preserved", b'<a>\n  <b>  t  </b>\n\t<c/>\n</a>', "", []),
    ("18-xml-lang", b'<r xml:lang="de"><e xml:space="preserve" a="1"/></r>', "0", []),
    ("19-utf8-text", "<e a=\"äöü\">€ \U0001F600</e>".encode("utf-8"), "", []),
    ("20-soap-body", ('<soap:Envelope xmlns:soap="%s" xmlns:wsu="urn:wsu" xmlns:wst="urn:wst"><soap:Header/>'
                      '<soap:Body wsu:Id="id-1"><wst:Challenge>5vDFzMbgGgM70s1hLOZwHebchHFMudpr</wst:Challenge></soap:Body>'
                      '</soap:Envelope>' % SOAP).encode(), "1", []),
    ("21-nested-default-change", b'<a xmlns="urn:1"><b xmlns="urn:2"><c xmlns="urn:1"/></b></a>', "", []),
    ("22-deep-subtree", b'<a xmlns:x="urn:x"><b><c><x:d x:k="v"><e/></x:d></c></b></a>', "0/0/0", []),
    ("23-gt-in-attr-and-quotes", b"<e a='he said \"hi\" &gt; ok'>x&gt;y</e>", "", []),
    ("24-no-ns-child-under-default", b'<a xmlns="urn:d"><b xmlns=""/></a>', "", []),
]

def main():
    for name, data, path, incl in VECTORS:
        root = etree.fromstring(data)
        el = root
        if path:
            for idx in path.split("/"):
                el = [c for c in el if isinstance(c.tag, str)][int(idx)]
        out = etree.tostring(el, method="c14n", exclusive=True, with_comments=False,
                             inclusive_ns_prefixes=incl or None)
        open(name + ".xml", "wb").write(data)
        open(name + ".args", "w").write(path + "\n" + " ".join(incl) + "\n")
        open(name + ".c14n", "wb").write(out)
        print(name, out)

if __name__ == "__main__":
    main()
