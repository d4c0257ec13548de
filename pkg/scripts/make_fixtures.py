#!/usr/bin/env python3
"""Regenerates everything under fixtures/ deterministically.

Outputs:
    fixtures/stores/<case>/        five reference store trees
    fixtures/traces/<case>.jsonl       recorded navigation traces with answers
    fixtures/llm/agent/*.json          digest-keyed responses for agent replays
    fixtures/llm/bench/music.json      digest-keyed responses for a suite build
    fixtures/llm/ingest/farm.json      digest-keyed responses for store building
    fixtures/conversations/farm.json   conversation history for the ingest demo
    fixtures/bench/persona_music.json  pipeline step-1 persona
    fixtures/growth/*.json             per-session page-creation series

Rerun after changing any prompt template; fixture keys are request digests.
"""

from __future__ import annotations

import itertools
import json
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from memcog import bench as benchkit  # noqa: E402
from memcog.agent import ProtocolConfig, run_proactive, run_reactive  # noqa: E402
from memcog.ingestion import extraction_request, naming_request  # noqa: E402
from memcog.links import Link  # noqa: E402
from memcog.llm import FixtureClient, LMResponse, RecordingClient  # noqa: E402
from memcog.navigation import dump_trace, visible_link_targets  # noqa: E402
from memcog.store import MemoryStore, Section, create_store, make_page, upsert_page  # noqa: E402
from memcog.wiki import write_store  # noqa: E402

FIXTURES = ROOT / "fixtures"


# ---------------------------------------------------------------------------
# Store construction helpers
# ---------------------------------------------------------------------------

def sec(title, category, detail, related=(), when=None):
    return Section(
        title=title,
        category=category,
        detail=detail,
        related_pages=list(related),
        temporal_context=when,
    )


def stub(store, dim, title, summary, tags, category="objective fact", detail=None):
    page = make_page(
        dim, title, summary, tags=list(tags),
        sections=[sec(title, category, detail or summary)],
    )
    upsert_page(store, dim, page)
    return page.path


def set_descriptions(store, descriptions):
    for dim in store.dimensions:
        dim.description = descriptions.get(dim.name, dim.description)


# -- case: simple factual ----------------------------------------------------

def build_simple_factual() -> MemoryStore:
    store = create_store("simple_factual")
    upsert_page(store, "topic", make_page(
        "topic", "education",
        "User graduated with a degree in Business Administration, which has helped them in their new role.",
        aliases=["degree", "college"],
        tags=["Business Administration", "graduation"],
        sections=[sec(
            "Business Administration degree", "objective fact",
            "User graduated with a degree in Business Administration, which has helped them in their new role. The degree grounds their work as a senior UX and motion designer and lecturer.",
        )],
    ))
    stub(store, "topic", "fitness routine",
         "User pursues fitness through a Fitbit, morning jogs, yoga, foam rolling, cycling, and tennis.",
         ["fitness", "routine"], "experience")
    stub(store, "topic", "stress relief",
         "User relieves stress with a lavender-chamomile diffuser and consistent mindfulness practices.",
         ["self-care", "mindfulness"], "preference")
    set_descriptions(store, {
        "topic": "The user is a senior UX and motion designer, lecturer, and craft vendor with a Business Administration degree who enjoys strategic logic puzzles, D&D, sci-fi movies, live music, and various sports, pursues fitness through a Fitbit, morning jogs, yoga, foam rolling, cycling, and tennis while seeking natural remedies, mindfulness practices, and consistent routines, relieves stress with a lavender-chamomile diffuser, monitors blood pressure, intends to get a flu shot, professionally requests lecture plans on radiation delivery systems and conducts augmented reality marketing research, creatively rewrites movie scripts into crossovers avoiding cliches, explores Python to plot script intensity and build interactive stock charts with alarms and stop-losses, analyzes DISC personality conflicts, considers",
    })
    return store


# -- case: enumeration -------------------------------------------------------

def build_enumeration() -> MemoryStore:
    store = create_store("enumeration")
    t = "user/assistant/topic"
    upsert_page(store, "topic", make_page(
        "topic", "bathroom maintenance",
        "User is experiencing a slow-draining bathroom sink and has used a plunger multiple times. They plan to buy a mesh screen to prevent future clogs. They also cleaned their shower curtain on the weekend of May 13-14, 2023, scrubbing off soap scum and mildew. Additionally, they plan to clean the sink ba",
        tags=["home maintenance", "cleaning", "plumbing"],
        sections=[sec(
            "Bathroom sink and shower curtain maintenance", "experience",
            "User is experiencing a slow-draining bathroom sink and has used a plunger multiple times. They plan to buy a mesh screen to prevent future clogs. They also cleaned their shower curtain on the weekend of May 13-14, 2023, scrubbing off soap scum and mildew. Additionally, they plan to clean the sink basin with baking soda and vinegar.",
            when="2023-05-14",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "home decor",
        "The user is upgrading their home decor by rearranging their living room, purchasing a new metal-legged coffee table, and shopping for light gray or beige throw pillows with wooden or metal accents to match a future sectional sofa, alongside a modern table lamp with metallic accents",
        tags=["living room", "bedroom", "furniture", "shopping"],
        sections=[
            sec(
                "Home decoration and furniture upgrades", "experience",
                "User is upgrading their home decor and furniture. They rearranged their living room and got a new coffee table with metal legs. They are looking for light gray or beige throw pillows with wooden or metal accents to match a future sectional sofa. They also want a modern table lamp with metallic accents to match the coffee table's metal legs. For the bedroom, they ordered a new Casper mattress on 2023-05-14 (referenced as last week), which is scheduled to arrive on 2023-05-24 (referenced as next Wednesday). They are also looking for bedside tables with metal or glass accents to complement the Casper mattress and their modern aesthetic.",
                related=["user/assistant/anniversary/casper mattress delivery.md"],
                when="2023-05-14",
            ),
            sec(
                "Shopping for throw pillows and home decor preferences", "preference",
                "User is shopping for 20\" x 20\" throw pillows for a standard 3-seater couch, starting with two pillows. They prefer shopping at West Elm, having previously bought a wooden coffee table with metal legs from them. When choosing throw pillows, they consider the couch fabric, wall color, and the industrial aesthetic of their coffee table's metal legs. They are looking for patterns and designs that tie in with the wood and metal aesthetic.",
                related=[f"{t}/home office.md"],
            ),
        ],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "cat care",
        "User is actively cat-proofing their home for their new kitten, Luna. On 2023-05-23, they bought scratch guards from IKEA to protect furniture from Luna's scratching, which has been effective. They also plan to rotate Luna's cat tree around the house every few days for a change of scenery. User has e",
        tags=["pet care", "cat-proofing", "grooming"],
        sections=[sec(
            "Cat-proofing and grooming kitten Luna", "experience",
            "User is actively cat-proofing their home for their new kitten, Luna. On 2023-05-23, they bought scratch guards from IKEA to protect furniture from Luna's scratching, which has been effective. They also plan to rotate Luna's cat tree around the house every few days for a change of scenery. User has established a grooming routine for Luna, brushing her 2-3 times a week for 5-10 minutes using a soft-bristle kitten brush. Luna initially squirmed but now enjoys and looks forward to brushing sessions, resulting in a healthier, shinier coat and increased affection. User is considering introducing nail trimming and ear cleaning to the routine soon.",
            related=["user/assistant/figure/luna.md"],
            when="2023-05-23",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "home improvement",
        "User fixed a wobbly leg on their kitchen table the weekend before 2023-05-26 by tightening a screw with a screwdriver; the wobbly leg had been bothering them for months. User is also planning to reorganize kitchen cabinets to improve flow and maximize storage space for cooking utensils and gadgets.",
        tags=["DIY", "kitchen", "furniture repair", "organization"],
        sections=[sec(
            "Home improvement and organization activities", "experience",
            "User fixed a wobbly leg on their kitchen table the weekend before 2023-05-26 by tightening a screw with a screwdriver; the wobbly leg had been bothering them for months. User is also planning to reorganize kitchen cabinets to improve flow and maximize storage space for cooking utensils and gadgets.",
            related=[f"{t}/interior design.md"],
            when="2023-05-26",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "dog care",
        "As of 2023-05-28, user is planning to get a new orthopedic dog bed for Max, who is getting older and needs joint comfort. User is leaning towards the Big Barker brand due to its high quality, 10-year warranty, and 100-night sleep trial. User also plans to wash Max's old blankets and beds to remove l",
        tags=["dog bed", "orthopedic", "Big Barker", "pet care"],
        sections=[sec(
            "Looking to buy an orthopedic dog bed for Max", "experience",
            "As of 2023-05-28, user is planning to get a new orthopedic dog bed for Max, who is getting older and needs joint comfort. User is leaning towards the Big Barker brand due to its high quality, 10-year warranty, and 100-night sleep trial. User also plans to wash Max's old blankets and beds to remove lingering scents before introducing the new bed.",
            related=[f"{t}/cooking.md", "user/assistant/figure/max.md"],
            when="2023-05-28",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "home office",
        "User assembled an IKEA bookshelf for their home office around March 2023 (about two months prior to May 29, 2023). The bookshelf has been a game-changer for their productivity, helping them stay organized and focused.",
        tags=["IKEA", "bookshelf", "organization", "productivity"],
        sections=[sec(
            "Assembled IKEA bookshelf for home office", "experience",
            "User assembled an IKEA bookshelf for their home office around March 2023 (about two months prior to May 29, 2023). The bookshelf has been a game-changer for their productivity, helping them stay organized and focused.",
            related=[f"{t}/home decor.md"],
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "interior design",
        "A user updating their modern living room purchased a West Elm wooden coffee table with metal legs and wants to incorporate navy accents, specifically liking the Navy Grid Velvet Pillow Cover and other throw pillows",
        tags=["home decor", "living room", "modern aesthetic", "navy accents"],
        sections=[
            sec(
                "Modern living room decor and navy accent preferences", "preference",
                "User enjoys modern interior design and is updating their living room. They purchased a wooden coffee table with metal legs from West Elm about three weeks before May 26, 2023 (delivered on May 18, 2023). They like the Navy Grid Velvet Pillow Cover from West Elm and want to add navy accents to their living room for a pop of color. They prefer to test colors with smaller accents first, like a navy throw blanket, before committing to larger items like a navy area rug.",
                when="2023-05-18",
            ),
            sec(
                "Living room decoration and throw pillow preferences", "preference",
                "User has a modern living room with a neutral color scheme (beige, gray, white) and a wooden coffee table with metal legs. On 2023-05-26, user was looking for throw pillows to complement the modern feel and add a pop of color. User likes velvet pillows in rich hues, specifically mustard and teal. Prefers to start with one bold, rich colored pillow and order swatches/samples before making a final decision. Interested in options from West Elm and CB2.",
                related=[f"{t}/home improvement.md"],
                when="2023-05-26",
            ),
        ],
    ))
    stub(store, "topic", "cooking",
         "User is exploring healthier cooking and baking, reorganizing the kitchen to support meal prep.",
         ["cooking", "baking"], "interest")
    upsert_page(store, "anniversary", make_page(
        "anniversary", "casper mattress delivery",
        "User ordered a Casper mattress on 2023-05-14; it is scheduled to arrive on 2023-05-24.",
        tags=["mattress", "delivery"],
        sections=[sec(
            "Casper mattress delivery window", "objective fact",
            "User ordered a Casper mattress on 2023-05-14; it is scheduled to arrive on 2023-05-24.",
            when="2023-05-24",
        )],
    ))
    stub(store, "figure", "max",
         "Max is the user's older dog who needs joint comfort and will get a new orthopedic bed.",
         ["dog", "pet"])
    stub(store, "figure", "luna",
         "Luna is the user's new kitten, now comfortable with a regular grooming routine.",
         ["cat", "kitten"])
    set_descriptions(store, {
        "topic": "The user is a software sales professional utilizing MEDDPICC and Obsidian who enjoys autocross with their modified 2018 Honda Civic Si, farming chickens, pigs, and a goat, caring for their kitten Luna and older dog Max, pursuing diverse artistic hobbies like Saturday sculpture classes, model building, photography with vintage cameras, playing guitar and violin, visiting art exhibitions, and listening to art and music podcasts, while conducting a systematic review on biochemical sensors for neuromodulation, writing a thesis on social media marketing, exploring Stoicism, feminism, protest and indie music, e-waste regulations, the Dictionary of Canadian Biography, and democratic election processes, and actively managing home maintenance, decor upgrades, healthier cooking and baking, travel planning, cryptocurrency security,",
        "anniversary": "Dated deliveries and scheduled events the user is tracking",
        "figure": "People and animals in the user's life",
    })
    for a, b in (
        ("home decor", "interior design"),
        ("home decor", "home office"),
        ("home improvement", "interior design"),
    ):
        store.links.add(
            Link(f"{t}/{a}.md", f"{t}/{b}.md", "related_to", False, 1.0, "co_occurrence"),
            set(store.page_paths()),
        )
    return store


# -- case: comparative -------------------------------------------------------

def build_comparative() -> MemoryStore:
    store = create_store("comparative")
    t = "user/assistant/topic"
    upsert_page(store, "topic", make_page(
        "topic", "social media marketing",
        "User attended a workshop on social media marketing on 2023-05-21. They also mentioned attending a similar workshop about two weeks prior to 2023-05-21 (around early May 2023), where they met interesting people, including a woman working for a non-profit that uses social media to drive social change.",
        tags=["social media", "marketing", "workshop"],
        sections=[sec(
            "Attended a social media marketing workshop", "experience",
            "User attended a workshop on social media marketing on 2023-05-21. They also mentioned attending a similar workshop about two weeks prior to 2023-05-21 (around early May 2023), where they met interesting people, including a woman working for a non-profit that uses social media to drive social change. They exchanged numbers and user has been following the organization's social media accounts since then.",
            related=[f"{t}/mental health awareness campaign.md",
                     "user/assistant/figure/non-profit woman from workshop.md"],
            when="2023-05-21",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "mental health awareness campaign",
        "User is creating a social media campaign to raise awareness about mental health, an issue close to their heart. They chose the branded hashtag #BreakTheSilenceMH for the campaign. They plan to share a series of posts on Instagram and Twitter, and are creating a content calendar to track posts. They",
        aliases=["#BreakTheSilenceMH"],
        tags=["mental health", "social media campaign", "awareness"],
        sections=[sec(
            "Creating a mental health awareness social media campaign", "experience",
            "User is creating a social media campaign to raise awareness about mental health, an issue close to their heart. They chose the branded hashtag #BreakTheSilenceMH for the campaign. They plan to share a series of posts on Instagram and Twitter, and are creating a content calendar to track posts. They previously shared personal stories about mental health on Instagram a few weeks prior to 2023-05-21.",
            related=[f"{t}/social media marketing.md",
                     "user/assistant/figure/non-profit woman from workshop.md"],
            when="2023-05-21",
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "social media",
        "An active social media content creator across multiple platforms, the user focuses on optimizing their online presence and driving website traffic through a Twitter growth strategy of consistently posting 5-7 daily educational and personal tweets without a set content calendar",
        tags=["Twitter", "social media strategy", "online presence", "engagement"],
        sections=[
            sec(
                "User's Twitter Strategy and Growth", "experience",
                "User is focused on optimizing their social media strategy to increase online presence and drive traffic to their website. On Twitter, they post a mix of educational and personal content, aiming for 5-7 tweets per day. They do not have a specific content calendar but try to stay consistent and engage with followers by responding to comments and DMs. Over the past month (as of 2023-05-29), their Twitter follower count grew from 420 to 540. User wants to increase their engagement rate and is interested in hosting a Twitter Chat or Q&A session, having participated in Twitter Chats before.",
                when="2023-05-29",
            ),
            sec(
                "Active social media content creator across multiple platforms", "experience",
                "User is active on Instagram, Facebook, Twitter, and TikTok, posting regularly about hobbies, interests, daily life, and updates about favorite TV shows and movies. Their goals are to drive engagement and increase follower count across all platforms. By 2023-05-29, they had gained around 200 followers on TikTok over the past three weeks. They get a lot of views on their Instagram stories and plan to use Instagram's 'Question' sticker to ask followers about their favorite TV shows and movies to encourage engagement.",
                related=[f"{t}/tv and movies.md"],
                when="2023-05-29",
            ),
            sec(
                "Active social media user across multiple platforms", "experience",
                "As of May 30, 2023, user is actively working on improving social media engagement across Instagram, Facebook, and TikTok. On Instagram, they are doing pretty well and their stories get a lot of views, especially when using the 'question' sticker. On Facebook, their follower count has remained steady at around 800, but their posts have been getting more shares and comments than usual. On TikTok, they post short videos showcasing their hobbies and interests, and have been surprised by how quickly their follower count has grown. User is interested in learning the best times to post, how to create engaging content, and strategies to grow their following on these platforms.",
                when="2023-05-30",
            ),
            sec(
                "User's Twitter usage and social media strategy", "experience",
                "User is focused on optimizing their social media strategy to increase online presence and drive traffic to their website. On Twitter, they post a mix of educational and personal content, aiming for 5-7 tweets per day. They do not use a specific content calendar but try to stay consistent and engage with followers by responding to comments and DMs. Over the past month (as of 2023-05-29), their Twitter follower count grew from 420 to 540. They have participated in Twitter Chats before and are interested in hosting their own Twitter Chat or Q&A session to increase engagement, and are currently seeking tips on how to promote it.",
                when="2023-05-29",
            ),
            sec(
                "Active social media content creator across multiple platforms", "experience",
                "User is active on Instagram, Facebook, Twitter, and TikTok, posting regularly about hobbies, interests, daily life, and updates about favorite TV shows and movies. Goals include driving engagement and increasing follower count across all platforms. By 2023-05-29, user had gained around 200 followers on TikTok over the past three weeks. User gets a lot of views on Instagram stories and plans to use Instagram's 'Question' sticker to ask followers about their favorite TV shows and movies to encourage engagement.",
                related=[f"{t}/reading.md"],
                when="2023-05-29",
            ),
            sec(
                "Social media usage and engagement strategy", "experience",
                "As of 2023-05-30, user is actively working on improving social media engagement across multiple platforms. On Instagram, they are doing pretty well and their stories get a lot of views, especially when using the 'question' sticker. On Facebook, their follower count has remained steady at around 800, but their posts have been getting more shares and comments than usual. On TikTok, they post short videos showcasing their hobbies and interests, and have been surprised by how quickly their follower count has grown. They are looking for advice on the best times to post, how to create engaging content, and how to grow their following, particularly on Facebook and TikTok.",
                when="2023-05-30",
            ),
        ],
    ))
    stub(store, "topic", "tv and movies",
         "User follows favorite TV shows and movies and shares updates about them on social media.",
         ["tv", "movies"], "interest")
    stub(store, "topic", "reading",
         "User keeps a bedtime reading habit and shares book updates online.",
         ["books", "reading"], "interest")
    stub(store, "figure", "non-profit woman from workshop",
         "A woman the user met at a social media marketing workshop; she works for a non-profit that uses social media to drive social change.",
         ["contact", "non-profit"])
    set_descriptions(store, {
        "topic": "The user is a vegan Year 10 student and non-profit leader who combats burnout through self-care, balancing a structured morning routine of journaling, freewriting, and a 2,000-word daily writing goal with poetry, short stories, and promotional writing for Gary Dranow and the Manic Emotions, while advocating for mental health and music therapy, organizing culturally sensitive social justice programs and innovative donor campaigns using magic events and VR/AR, exploring permaculture and sustainable living, investing in real estate and mountain cabins, enjoying skincare, home mixology, vegan meal prep, crochet, crafts, photography, yoga, mythology, Harry Potter, and Mandarin, managing a daily routine and bedtime reading, parenting bilingual children with speech concerns",
        "figure": "People in the user's life",
    })
    store.links.add(
        Link(f"{t}/mental health awareness campaign.md", f"{t}/social media marketing.md",
             "related_to", False, 1.0, "co_occurrence"),
        set(store.page_paths()),
    )
    return store


# -- case: timeline ----------------------------------------------------------

def build_timeline() -> MemoryStore:
    store = create_store("timeline")
    t = "user/assistant/topic"
    p = "user/assistant/place"
    f = "user/assistant/figure"
    upsert_page(store, "topic", make_page(
        "topic", "pet goat",
        "The user has a well-behaved pet goat that likes to try new foods, considers it a great travel companion and hopes to bring it on a Dublin dining tour, regularly trims its hooves with improving skill, and has developed an interest in European pet food regulations",
        aliases=["goat"],
        tags=["pet", "goat"],
        sections=[
            sec(
                "Owns a pet goat", "experience",
                "The user has a pet goat and considers it a great travel companion. The user says this goat is very well-behaved, likes to try new foods and drinks, and hopes to bring it along on a Dublin dining tour.",
                related=[f"{t}/Irish independence movement history.md",
                         f"{f}/pet goat.md", f"{p}/Dublin.md"],
            ),
            sec(
                "Regularly trims goat hooves with improving skill", "experience",
                "The user has been working on trimming their farm animals' hooves more regularly and is becoming more proficient with practice. On 2023-05-11, the user successfully completed a hoof trimming without making a mess and felt proud of the accomplishment.",
                related=[f"{t}/farm management and open day event.md",
                         f"{f}/pet goat.md", f"{f}/farm cows.md",
                         f"{f}/farm chickens.md", f"{p}/user's farm.md"],
                when="2023-05-11",
            ),
            sec(
                "Interest in European pet food regulations", "interest",
                "On 2023-05-25, user asked about whether pet foods require pre-market authorization in Europe, indicating an interest in European pet food regulations and market requirements.",
                when="2023-05-25",
            ),
        ],
    ))
    stub(store, "topic", "Irish independence movement history",
         "User is interested in Dublin independence movement historical tours with student discounts.",
         ["history", "Dublin"], "interest")
    stub(store, "topic", "farm management and open day event",
         "User plans a farm open day with a petting zoo and is weighing a dairy cow investment.",
         ["farm", "open day"], "experience")
    stub(store, "topic", "birdwatching and equipment",
         "User birdwatches at a nearby nature center and park and is comparing binoculars.",
         ["birdwatching"], "interest")
    stub(store, "topic", "Asian fusion cooking",
         "User cooks Asian fusion dishes and makes spicy homemade kimchi.",
         ["cooking", "kimchi"], "experience")
    upsert_page(store, "place", make_page(
        "place", "user's farm",
        "The user owns and operates a farm raising goats and chickens with plans to add cows, intends to build a small shop selling farm products, will host an open day event, has birdwatching spots nearby, and has an east-side fence that needed repair",
        tags=["farm", "shop", "residence"],
        sections=[
            sec(
                "User's farm", "objective fact",
                "The user owns and operates a farm raising goats and chickens, with plans to add cows. The farm will host an open day event, and the user also plans to build a small shop on the farm to sell farm products and dairy.",
                related=[f"{t}/pet goat.md",
                         f"{t}/farm management and open day event.md",
                         f"{f}/pet goat.md", f"{f}/farm cows.md", f"{f}/farm chickens.md"],
            ),
            sec(
                "Birdwatching spots near user's home", "objective fact",
                "The user's home is located in the eastern part of the state, with a nature center (featuring mixed forest and grassland habitat) and a park nearby, both of which are frequent birdwatching spots for the user.",
                related=[f"{t}/birdwatching and equipment.md"],
            ),
            sec(
                "East-side fence repair", "objective fact",
                "The user's farm has an east-side fence where the goats like to graze. The fence was repaired on 2023-05-04.",
                related=[f"{t}/farm management and open day event.md",
                         f"{t}/Asian fusion cooking.md", f"{f}/pet goat.md"],
                when="2023-05-04",
            ),
        ],
    ))
    stub(store, "place", "Dublin",
         "Dublin is a travel target for historical tours and a dining tour with the pet goat.",
         ["travel", "Ireland"])
    stub(store, "figure", "pet goat",
         "The user's well-behaved pet goat, a travel companion that likes trying new foods.",
         ["pet", "goat"])
    stub(store, "figure", "farm cows",
         "Dairy cows the user plans to add to the farm.", ["farm", "cows"])
    stub(store, "figure", "farm chickens",
         "Chickens the user raises on the farm.", ["farm", "chickens"])
    set_descriptions(store, {
        "topic": "A third-year electrical engineering student and farmer manages diverse interests including Indian agricultural politics, a farm open day with a petting zoo and dairy cow investment, Dublin and Bali historical tours and illuminated manuscripts with their well-behaved pet goat, a healthier baked latke Hanukkah dinner with caramelized onions and braised red cabbage followed by a synagogue candlelight vigil, decade-based road trip playlists balancing upbeat and slow tracks, innovative Pythagorean theorem objective questions in LaTeX, HVAC engineering using Malaysian tariffs, optimizing a 90-minute bus commute with self-improvement podcasts, French economic history in Guise and dining at Le Bocage, casual warm-toned fashion, an FC Barcelona Reddit strategy, Asian fusion cooking and spicy homemade kimchi, applying",
        "place": "A Toronto Metropolitan University student who runs a goat and chicken farm-planning to add cows, host an open day, open a small shop, and repair an east fence-discussed Indian political strategies and agricultural reforms, Jamaican reggae and ska origins, Hull's urban redevelopment, the Philippines' furniture exports, robotic mapping research at the University of Freiburg, and the Good Friday Agreement regarding Northern Ireland, expressed interest in Dublin independence movement historical tours with student discounts and dining packages, inquired about Bali's Mount Batur and Uluwatu, attended a local Hanukkah candlelight vigil at a nearby synagogue, requested a chiller system operating cost calculation using the Malaysian daylight electrical tariff, planned a trip to Guise, France,",
        "figure": "People and animals in the user's life",
    })
    known = set(store.page_paths())
    store.links.add(Link(f"{p}/user's farm.md", f"{t}/pet goat.md", "temporal_next", True,
                         1.0, "temporal_proximity"), known)
    store.links.add(Link(f"{t}/farm management and open day event.md", f"{t}/pet goat.md",
                         "related_to", False, 1.0, "co_occurrence"), known)
    return store


# -- case: open ended --------------------------------------------------------

def build_open_ended() -> MemoryStore:
    store = create_store("open_ended")
    t = "user/assistant/topic"
    p = "user/assistant/place"
    f = "user/assistant/figure"
    upsert_page(store, "topic", make_page(
        "topic", "bicycle commute",
        "The user plans to buy a hybrid bicycle for weekday rush-hour commuting to avoid crowded Monday buses. Starting from 123 Oak St to 456 Main St. Prefers bike lanes and quiet streets, avoiding busy roads and steep hills. Planned route is approximately 2.6 miles, estimated 35-45 minutes during morning rush. Plans to depart around 7:30am to arrive at the office before 8:30am. Also considering buying a bike lock and installing a bike rack at the office.",
        tags=["commute", "bicycle", "work route"],
        sections=[sec(
            "Planning to buy a bicycle for commuting and route planning", "experience",
            "The user plans to buy a hybrid bicycle for weekday rush-hour commuting to avoid crowded Monday buses. Starting from 123 Oak St to 456 Main St. Prefers bike lanes and quiet streets, avoiding busy roads and steep hills. Planned route is approximately 2.6 miles, estimated 35-45 minutes during morning rush. Plans to depart around 7:30am to arrive at the office before 8:30am. Also considering buying a bike lock and installing a bike rack at the office.",
            related=[f"{t}/daily routine and time management.md", f"{t}/podcasts.md",
                     f"{p}/123 oak st.md", f"{p}/456 main st.md"],
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "podcasts",
        "The user enjoys listening to podcasts during their commute, currently listening to \"How I Built This\" and feeling inspired by entrepreneurial stories, plans to continue listening while cycling to work",
        tags=["podcasts", "entrepreneurship", "commute entertainment"],
        sections=[
            sec(
                "Podcast listening preferences during commute", "preference",
                "The user enjoys listening to podcasts during their commute, currently listening to \"How I Built This\" and feeling inspired by entrepreneurial stories. Plans to continue listening to podcasts while cycling to work.",
                related=[f"{t}/bicycle commute.md",
                         f"{t}/daily routine and time management.md",
                         f"{p}/123 oak st.md", f"{p}/456 main st.md"],
            ),
            sec(
                "Podcast listening preferences and commute habits", "preference",
                "As of 2023-05-26, user listens to podcasts during their commute, which is about 40 minutes each way. They currently listen to true crime and self-improvement genres but want to branch out into other genres. They are particularly interested in history and science podcasts. Recommended history podcasts include Hardcore History, Lore, and The Dollop. Recommended science podcasts include StarTalk Radio, Radiolab, and Stuff You Should Know.",
                related=[f"{t}/19th-century Korean history.md"],
                when="2023-05-26",
            ),
        ],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "indie rock",
        "User has been listening to a lot of indie rock lately and is a fan of The Killers. Also familiar with The Strokes and Arctic Monkeys. Discovered The 1975 when they opened for The Killers at Red Rocks Amphitheater and really enjoyed their performance.",
        tags=["music", "indie rock", "The Killers", "The 1975"],
        sections=[sec(
            "Interest in indie rock music", "preference",
            "User has been listening to a lot of indie rock lately and is a fan of The Killers. Also familiar with The Strokes and Arctic Monkeys. Discovered The 1975 when they opened for The Killers at Red Rocks Amphitheater and really enjoyed their performance.",
            related=[f"{t}/live music and festivals.md", f"{f}/Brandon Flowers.md",
                     f"{p}/Denver.md", f"{p}/Nashville.md", f"{p}/Chicago.md",
                     f"{p}/Red Rocks Amphitheater.md"],
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "film soundtracks",
        "Recently listens to film soundtracks frequently, especially Hans Zimmer scores. Has a dedicated film soundtrack playlist on Spotify, adds new tracks weekly. Listening to film soundtracks helps maintain focus during work projects.",
        tags=["music", "soundtracks", "productivity"],
        sections=[sec(
            "Film soundtrack preferences and listening habits", "preference",
            "Recently listens to film soundtracks frequently, especially Hans Zimmer scores. Has a dedicated film soundtrack playlist on Spotify, adds new tracks weekly. Listening to film soundtracks helps maintain focus during work projects.",
            related=[f"{t}/films.md", f"{f}/family.md"],
        )],
    ))
    upsert_page(store, "topic", make_page(
        "topic", "anxiety and mental health management",
        "User experiences work-triggered anxiety and panic attacks, and is exploring self-care strategies like mindful breathing and meditation while also struggling with self-consciousness and a desire to build confidence",
        tags=["anxiety", "mental health", "self-care", "panic attack", "work stress"],
        sections=[
            sec(
                "User's experience with anxiety and self-care strategies", "experience",
                "User experiences anxiety and had a major panic attack at work around April 11, 2023 (about 6 weeks prior to May 23, 2023), triggered by work deadlines. To manage anxiety and prevent future attacks, user is exploring self-care activities. They are interested in mindful breathing, short meditation sessions, and progressive muscle relaxation. User plans to start using the Headspace app for guided recordings during lunch breaks. They are actively trying to prioritize well-being and make self-care a habit, especially when feeling overwhelmed with work.",
                related=[f"{t}/work and project management.md"],
                when="2023-05-23",
            ),
            sec(
                "Struggles with self-consciousness and desire to build confidence", "experience",
                "As of 2023-05-27, the user struggles with being too self-conscious around new people and wants to be more comfortable in their own skin. They are actively working on building confidence and meaningful relationships. To step out of their comfort zone, they plan to attend social events and join a public speaking group.",
                when="2023-05-27",
            ),
        ],
    ))
    for title, summary, tags in (
        ("daily routine and time management",
         "User structures mornings around runs, quick healthy meals, and a planned commute.", ["routine"]),
        ("19th-century Korean history",
         "User reads about 19th-century Korean history and related podcasts.", ["history"]),
        ("live music and festivals",
         "User attends live shows and discovered new bands at festival performances.", ["music", "live"]),
        ("films",
         "User enjoys films like Everything Everywhere All at Once and Marvel releases.", ["movies"]),
        ("work and project management",
         "User manages work deadlines that sometimes trigger anxiety.", ["work"]),
    ):
        stub(store, "topic", title, summary, tags, "interest")
    for title, summary in (
        ("123 oak st", "The user's home address and commute start point."),
        ("456 main st", "The user's office address and commute end point."),
        ("Denver", "City where the user has caught live shows."),
        ("Nashville", "City on the user's live-music map."),
        ("Chicago", "City on the user's live-music map."),
        ("Red Rocks Amphitheater", "Venue where The 1975 opened for The Killers."),
    ):
        stub(store, "place", title, summary, ["place"])
    stub(store, "figure", "Brandon Flowers", "Frontman of The Killers.", ["musician"])
    stub(store, "figure", "family", "The user's family, featured in photo sharing and trips.", ["family"])
    set_descriptions(store, {
        "topic": "Managing work-triggered anxiety and deadlines through mindful breathing, structured morning routines with runs, quick healthy meals, and Thursday squash games, the user commutes via a hybrid bicycle while listening to indie rock and podcasts, exploring dystopian AI-generated art and prompt crafting, AI safety, Alan Watts' philosophy, sci-fi and gothic literature, 19th-century Korean and American history, Beyonce's activism, and ocean conservation, planning Outer Banks and international road trips with curated playlists and packed snacks, a sibling camping trip featuring family photo sharing and cooking competitions, developing Brazilian Jiu-Jitsu training programs and a Flow blockchain-based educational game with NFT markets, enjoying films like Everything Everywhere All at Once and Marvel content while listening to film soundtracks to focus",
        "place": "Addresses, cities, and venues in the user's life",
        "figure": "People in the user's life",
    })
    known = set(store.page_paths())
    store.links.add(Link(f"{t}/bicycle commute.md", f"{t}/podcasts.md", "related_to",
                         False, 1.0, "co_occurrence"), known)
    store.links.add(Link(f"{t}/indie rock.md", f"{t}/live music and festivals.md",
                         "related_to", False, 1.0, "co_occurrence"), known)
    return store


CASES = {
    "simple_factual": build_simple_factual,
    "enumeration": build_enumeration,
    "comparative": build_comparative,
    "timeline": build_timeline,
    "open_ended": build_open_ended,
}


# ---------------------------------------------------------------------------
# Scripted agent runs
# ---------------------------------------------------------------------------

class PolicyClient:
    """Plays a pre-written transcript; used only at fixture-recording time."""

    def __init__(self, script: list[str]):
        self._steps = iter(script)

    def complete(self, request):
        return LMResponse(next(self._steps))


def step(thought: str, action: str) -> str:
    return f"Thought: {thought}\nAction: {action}"


REACTIVE_SCRIPTS = {
    "simple_factual": {
        "question": "What degree did I graduate with?",
        "expect": "Business Administration",
        "script": [
            step("A degree is a single biographical fact; start with the dimension overview.",
                 "list_dimensions[]"),
            step("The topic dimension summary already mentions a Business Administration degree; the page listing will confirm.",
                 "browse_dimension[topic]"),
            step("The education entry states the degree explicitly.",
                 "answer[Business Administration]"),
        ],
    },
    "enumeration": {
        "question": "How many pieces of furniture did I buy, assemble, sell, or fix in the past few months?",
        "expect": "4",
        "script": [
            step("Furniture events will be spread over home-related pages; list them first.",
                 "browse_dimension[topic]"),
            step("home decor should cover purchases.",
                 "read_page[user/assistant/topic/home decor.md]"),
            step("A coffee table and a Casper mattress were bought. home office mentions assembling a bookshelf.",
                 "read_page[user/assistant/topic/home office.md]"),
            step("IKEA bookshelf assembled. home improvement covers repairs.",
                 "read_page[user/assistant/topic/home improvement.md]"),
            step("Kitchen table leg fixed. The interior design link may hide more furniture events; follow it to be exhaustive.",
                 "follow_link[user/assistant/topic/interior design.md]"),
            step("Interior design repeats the West Elm coffee table, nothing new. Bought: coffee table, Casper mattress. Assembled: IKEA bookshelf. Fixed: kitchen table leg. Sold: none.",
                 "answer[4. Bought a West Elm coffee table and a Casper mattress, assembled an IKEA bookshelf, and fixed the kitchen table's wobbly leg; no furniture was sold.]"),
        ],
    },
    "comparative": {
        "question": "Which social media platform did I gain the most followers on over the past month?",
        "expect": "TikTok",
        "script": [
            step("Follower counts live under social media topics; list the pages.",
                 "browse_dimension[topic]"),
            step("The social media page should carry platform-by-platform numbers.",
                 "read_page[user/assistant/topic/social media.md]"),
            step("TikTok gained about 200 followers in three weeks; Twitter grew 420 to 540 (+120); Facebook held steady near 800. Check the marketing page for more numbers.",
                 "read_page[user/assistant/topic/social media marketing.md]"),
            step("Only workshop notes, no follower counts. Check the campaign page before comparing.",
                 "read_page[user/assistant/topic/mental health awareness campaign.md]"),
            step("No counts there either. TikTok's +200 beats Twitter's +120 and Facebook's flat 800.",
                 "answer[TikTok — it gained about 200 followers over the past three weeks, versus +120 on Twitter (420 to 540) and a steady ~800 on Facebook.]"),
        ],
    },
    "timeline": {
        "question": "Which task did I complete first, fixing the fence or trimming the goats' hooves?",
        "expect": "Fixing the fence",
        "script": [
            step("Two dated farm chores; check which dimensions hold farm content.",
                 "list_dimensions[]"),
            step("topic mentions the goat, place mentions the fence repair; start with the goat page.",
                 "browse_dimension[topic]"),
            step("The pet goat page should carry the hoof trimming date.",
                 "read_page[user/assistant/topic/pet goat.md]"),
            step("Hooves trimmed on 2023-05-11, and the page links to the farm where the fence lives.",
                 "follow_link[user/assistant/place/user's farm.md]"),
            step("The fence was repaired on 2023-05-04, before the 2023-05-11 hoof trimming.",
                 "answer[Fixing the fence. The fence was repaired on 2023-05-04, while the goats' hooves were trimmed on 2023-05-11.]"),
        ],
    },
    "open_ended": {
        "question": "Can you suggest some activities I can do during my commute to work?",
        "expect": "podcasts",
        "script": [
            step("Commute suggestions should build on stored commute and listening habits.",
                 "browse_dimension[topic]"),
            step("The podcasts page covers commute listening preferences.",
                 "read_page[user/assistant/topic/podcasts.md]"),
            step("They cycle, so audio works: podcasts, and they want history/science genres. Check music preferences too.",
                 "read_page[user/assistant/topic/indie rock.md]"),
            step("Indie rock favorites noted. Suggest audio activities grounded in these pages.",
                 "answer[Since you cycle to work, audio fits best: keep up \"How I Built This\" and branch into the history and science podcasts you wanted — Hardcore History, Lore, StarTalk Radio, or Radiolab — or queue up indie rock from The Killers, The Strokes, Arctic Monkeys, and The 1975.]"),
        ],
    },
}

TIMELINE_NO_OVERLAY_SCRIPT = {
    "question": "Which task did I complete first, fixing the fence or trimming the goats' hooves?",
    "expect": "Fixing the fence",
    "script": [
        step("Two dated farm chores; check which dimensions hold farm content.",
             "list_dimensions[]"),
        step("topic mentions the goat; place mentions the fence. Read the goat page for the trimming date.",
             "browse_dimension[topic]"),
        step("The pet goat page should carry the hoof trimming date.",
             "read_page[user/assistant/topic/pet goat.md]"),
        step("Hooves trimmed on 2023-05-11. The farm page under place should date the fence repair.",
             "read_page[user/assistant/place/user's farm.md]"),
        step("The fence was repaired on 2023-05-04, before the 2023-05-11 hoof trimming.",
             "answer[Fixing the fence. The fence was repaired on 2023-05-04, while the goats' hooves were trimmed on 2023-05-11.]"),
    ],
}

PROACTIVE_SCRIPT = {
    "utterance": "Feeling terrible, don't want to do anything.",
    "script": [
        step("The user sounds low; memory may hold coping habits worth recalling.",
             "browse_dimension[topic]"),
        step("The anxiety and mental health management page should list self-care strategies.",
             "read_page[user/assistant/topic/anxiety and mental health management.md]"),
        step("Found concrete self-care strategies; enough to recall.",
             "answer[done]"),
    ],
    "generation": json.dumps(
        [
            {
                "memory_unit": "mindful breathing, short meditation sessions, and progressive muscle relaxation",
                "reason": "Association path: user expresses negative emotion → browse the topic dimension → read anxiety and mental health management → find the self-care strategies the user is exploring",
            },
            {
                "memory_unit": "Headspace app for guided recordings during lunch breaks",
                "reason": "Association path: user feels terrible → anxiety management page → user plans to start the Headspace app for guided recordings",
            },
        ],
        ensure_ascii=False,
    ),
}


def record_reactive_case(name: str, store: MemoryStore, spec: dict, config: ProtocolConfig):
    recorder = RecordingClient(PolicyClient(spec["script"]))
    answer, steps = run_reactive(store, spec["question"], recorder, config)
    if spec["expect"].lower() not in answer.lower():
        raise SystemExit(f"{name}: scripted answer {answer!r} missing {spec['expect']!r}")
    return recorder.captured, answer, steps


def trace_from_steps(steps, answer: str) -> list[dict]:
    records = []
    n = 0
    for item in steps:
        if item.observation is None or item.action is None:
            continue
        n += 1
        records.append({
            "step": n,
            "action": item.action.to_dict(),
            "observation_digest": item.observation.digest(),
            "links_seen": visible_link_targets(item.observation),
        })
    records.append({"answer": answer})
    return records


# ---------------------------------------------------------------------------
# Ingestion fixtures (farm history)
# ---------------------------------------------------------------------------

FARM_TURNS = [
    {"session_id": 1, "turns": [
        {"turn_id": 1, "role": "user",
         "content": "Good news from the farm: the east-side fence where the goats like to graze finally got repaired on 2023-05-04.",
         "timestamp": "2023-05-04T18:02:00"},
        {"turn_id": 2, "role": "assistant",
         "content": "That's great — a sound fence makes grazing much safer.",
         "timestamp": "2023-05-04T18:02:30"},
        {"turn_id": 3, "role": "user",
         "content": "I raise goats and chickens on the farm and plan to add cows, plus a small shop for farm products someday.",
         "timestamp": "2023-05-04T18:05:00"},
        {"turn_id": 4, "role": "assistant",
         "content": "Sounds like a thriving operation — cows and a shop would round it out nicely.",
         "timestamp": "2023-05-04T18:05:40"},
    ]},
    {"session_id": 2, "turns": [
        {"turn_id": 1, "role": "user",
         "content": "Proud moment today: on 2023-05-11 I finished trimming my farm animals' hooves without making a mess. Practice pays off.",
         "timestamp": "2023-05-11T17:20:00"},
        {"turn_id": 2, "role": "assistant",
         "content": "Nice work — hoof care takes real skill.",
         "timestamp": "2023-05-11T17:20:45"},
    ]},
]

FARM_EXTRACTION_S1 = json.dumps([
    {"turn_id": 1, "detail": "The farm's east-side fence where the goats like to graze was repaired on 2023-05-04.",
     "category": "objective fact",
     "entity_terms": ["farm", "fence", "goats"],
     "temporal_context": "2023-05-04",
     "facts": [["east-side fence", "repaired_on", "2023-05-04", "2023-05-04"]]},
    {"turn_id": 3, "detail": "The user raises goats and chickens on the farm, plans to add cows, and wants to open a small shop for farm products.",
     "category": "objective fact",
     "entity_terms": ["farm", "goats", "chickens", "cows", "shop"],
     "temporal_context": None,
     "facts": [["farm", "raises", "goats and chickens", None]]},
], ensure_ascii=False)

FARM_EXTRACTION_S2 = json.dumps([
    {"turn_id": 1, "detail": "The user has been trimming their farm animals' hooves more regularly; on 2023-05-11 they completed a hoof trimming without making a mess and felt proud.",
     "category": "experience",
     "entity_terms": ["goat", "hooves", "trimming"],
     "temporal_context": "2023-05-11",
     "facts": [["hoof trimming", "completed_on", "2023-05-11", "2023-05-11"]]},
], ensure_ascii=False)

FARM_NAMING_FARM = json.dumps({
    "dimension": "place",
    "title": "user's farm",
    "summary": "The user owns a farm raising goats and chickens with plans to add cows, a small shop, and an east-side fence that needed repair.",
    "aliases": ["farm"],
    "tags": ["farm", "shop", "residence"],
    "section_titles": ["East-side fence repair", "User's farm"],
}, ensure_ascii=False)

FARM_NAMING_GOAT = json.dumps({
    "dimension": "topic",
    "title": "pet goat",
    "summary": "The user regularly trims their goat's hooves with improving skill.",
    "aliases": ["goat"],
    "tags": ["pet", "goat"],
    "section_titles": ["Regularly trims goat hooves with improving skill"],
}, ensure_ascii=False)


def build_farm_fixtures() -> dict[str, str]:
    from memcog.ingestion import load_turns

    turns = load_turns(FARM_TURNS)
    client = FixtureClient({})
    by_session = {1: [], 2: []}
    for turn in turns:
        by_session[turn.session_id].append(turn)
    client.record(
        extraction_request(1, [t for t in by_session[1] if t.role == "user"]),
        FARM_EXTRACTION_S1,
    )
    client.record(
        extraction_request(2, [t for t in by_session[2] if t.role == "user"]),
        FARM_EXTRACTION_S2,
    )
    # Cluster naming requests are derived from the extraction output above.
    from memcog.ingestion import ExtractedFact
    from memcog.store import Fact

    fence = ExtractedFact(
        detail="The farm's east-side fence where the goats like to graze was repaired on 2023-05-04.",
        category="objective fact",
        entity_terms=["farm", "fence", "goats"],
        temporal_context="2023-05-04",
        source=(1, 1),
        facts=[Fact("east-side fence", "repaired_on", "2023-05-04", "2023-05-04")],
    )
    farm = ExtractedFact(
        detail="The user raises goats and chickens on the farm, plans to add cows, and wants to open a small shop for farm products.",
        category="objective fact",
        entity_terms=["farm", "goats", "chickens", "cows", "shop"],
        temporal_context=None,
        source=(1, 3),
        facts=[Fact("farm", "raises", "goats and chickens", None)],
    )
    goat = ExtractedFact(
        detail="The user has been trimming their farm animals' hooves more regularly; on 2023-05-11 they completed a hoof trimming without making a mess and felt proud.",
        category="experience",
        entity_terms=["goat", "hooves", "trimming"],
        temporal_context="2023-05-11",
        source=(2, 1),
        facts=[Fact("hoof trimming", "completed_on", "2023-05-11", "2023-05-11")],
    )
    client.record(naming_request([fence, farm]), FARM_NAMING_FARM)
    client.record(naming_request([goat]), FARM_NAMING_GOAT)
    return client.responses


# ---------------------------------------------------------------------------
# Bench fixtures (synthetic author for the "music" topic)
# ---------------------------------------------------------------------------

PERSONA_MUSIC = {
    "basic_demographics": {
        "name": "Lin", "age": 27, "city": "Hangzhou", "occupation": "junior architect",
    },
    "domain_expertise": "amateur classical pianist since age 8, working through advanced repertoire and music theory",
    "family_relationships": {
        "grandmother": "loves Beethoven's Moonlight Sonata",
        "mother": "sings in a community choir",
    },
    "social_circle": {
        "teacher_zhang": "piano teacher who guides tone and phrasing",
        "joe": "college friend from Yantai",
        "mia": "duet partner from the conservatory",
    },
    "daily_routines": [
        "practices piano most weekday evenings",
        "listens to BBC Radio 3 over breakfast",
        "brews green tea before practice",
    ],
    "emotion_behavior_mappings": {
        "stressed": "plays slow Chopin nocturnes",
        "happy": "improvises jazz standards",
    },
    "life_milestones": [
        "won a regional piano competition at 16",
        "performed at a charity gala in 2023",
    ],
    "environmental_preferences": [
        "practices in a quiet room with warm lighting",
        "plays vinyl records on Sunday mornings",
    ],
}

_COMPOSERS = ["Bach", "Chopin", "Debussy", "Beethoven", "Ravel", "Satie",
              "Mozart", "Schubert", "Liszt", "Brahms", "Haydn", "Grieg"]
_PIECES = ["WTC", "Nocturne in C minor", "Clair de Lune", "Moonlight Sonata",
           "Jeux d'eau", "Gymnopedie No.1", "Sonata K.331", "Impromptu Op.90",
           "Consolation No.3", "Intermezzo Op.118", "Sonata Hob.XVI", "Lyric Pieces"]
_DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday",
         "Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday"]
_PEOPLE = ["my grandmother", "Teacher Zhang", "Joe", "Mia", "my mother",
           "my neighbor", "my college roommate", "my cousin", "my boss",
           "my duet partner", "my aunt", "my childhood friend"]
_FEELINGS = ["stressed", "happy", "nostalgic", "anxious", "restless", "tired",
             "cheerful", "gloomy", "focused", "lonely", "excited", "calm"]
_HABITS = ["brew green tea", "light a candle", "stretch my fingers",
           "open the window", "dust the keys", "record a voice memo",
           "tune the metronome", "review my notebook", "clip my nails",
           "warm up with scales", "silence my phone", "make a pot of oolong"]


def _make_units() -> list[dict]:
    units = []
    units.append({
        "id": "time_01", "type": "temporal trigger",
        "time_pattern": "every Monday evening",
        "activity": "practice Bach WTC",
        "natural_expression": "I practice Bach's WTC every Monday evening.",
        "involved_entities": ["Bach", "WTC", "piano"],
    })
    for i in range(2, 13):
        composer, piece, day = _COMPOSERS[i - 1], _PIECES[i - 1], _DAYS[i - 1]
        units.append({
            "id": f"time_{i:02d}", "type": "temporal trigger",
            "time_pattern": f"every {day} evening",
            "activity": f"practice {composer} {piece}",
            "natural_expression": f"I work on {composer}'s {piece} every {day} evening.",
            "involved_entities": [composer, piece, "piano"],
        })
    for i in range(1, 13):
        composer, piece, person = _COMPOSERS[i - 1], _PIECES[i - 1], _PEOPLE[i - 1]
        units.append({
            "id": f"entity_{i:02d}", "type": "entity trigger",
            "entity_binding": f"{person} and {composer}",
            "natural_expression": f"{person.capitalize()} adores {composer}'s {piece}.",
            "involved_entities": [person.replace("my ", ""), composer, piece],
        })
    for i in range(1, 13):
        feeling, composer = _FEELINGS[i - 1], _COMPOSERS[i - 1]
        units.append({
            "id": f"emo_{i:02d}", "type": "emotional trigger",
            "emotion": feeling,
            "natural_expression": f"When I feel {feeling} I turn to {composer} at the piano.",
            "involved_entities": [feeling, composer, "piano"],
        })
    for i in range(1, 13):
        habit, day = _HABITS[i - 1], _DAYS[i - 1]
        units.append({
            "id": f"behav_{i:02d}", "type": "behavioral pattern trigger",
            "pattern": f"{habit} before practice",
            "natural_expression": f"I always {habit} before my {day} practice session.",
            "involved_entities": [habit.split()[-1], "practice", day],
        })
    hops = [
        ("Joe", "Yantai apples", "Yantai"),
        ("Mia", "duet recital", "city hall"),
        ("Teacher Zhang", "tone exercises", "conservatory"),
        ("my grandmother", "Moonlight Sonata record", "vinyl shelf"),
        ("my mother", "choir accompanist", "community hall"),
        ("Joe", "college music club", "campus"),
        ("Mia", "festival duet", "spring festival"),
        ("Teacher Zhang", "competition coaching", "regional competition"),
        ("my grandmother", "birthday recital", "living room"),
        ("my mother", "hymn arrangements", "choir book"),
        ("Joe", "road-trip playlist", "coastal drive"),
        ("Mia", "page turner", "gala stage"),
    ]
    for i, (person, thing, place) in enumerate(hops, start=1):
        units.append({
            "id": f"multi_{i:02d}", "type": "multi-hop trigger",
            "chain": f"{person} -> {thing} -> {place}",
            "natural_expression": f"{person.capitalize()} once brought me {thing}, which always makes me think of {place}.",
            "involved_entities": [person.replace("my ", ""), thing, place],
        })
    return units


def _high_pairs(units: list[dict]) -> set[tuple[str, str]]:
    pairs = set()
    for i in range(1, 13):
        pairs.add(tuple(sorted((f"time_{i:02d}", f"entity_{i:02d}"))))
        pairs.add(tuple(sorted((f"emo_{i:02d}", f"behav_{i:02d}"))))
    for i in range(1, 7):
        pairs.add(tuple(sorted((f"multi_{i:02d}", f"time_{i:02d}"))))
    for i in range(7, 13):
        pairs.add(tuple(sorted((f"multi_{i:02d}", f"entity_{i:02d}"))))
    return pairs


def _score_pair(a: dict, b: dict, high: set[tuple[str, str]]) -> dict:
    shared = sorted(
        {e.lower() for e in a["involved_entities"]} & {e.lower() for e in b["involved_entities"]}
    )
    is_high = tuple(sorted((a["id"], b["id"]))) in high
    overlap = min(5, 1 + 2 * len(shared))
    relevance = min(5, (4 if is_high else 2) + len(shared) // 2)
    reasonability = 5 if is_high else min(2, 1 + len(shared))
    coherence = min(5, (4 if is_high else 2) + len(shared) // 2)
    return {
        "pair_a_id": a["id"], "pair_b_id": b["id"],
        "shared_entities": shared,
        "scores": {
            "entity_overlap": overlap,
            "semantic_relevance": relevance,
            "association_reasonability": reasonability,
            "conversation_coherence": coherence,
        },
        "association_path": (
            f"Shared entities: {', '.join(shared)}." if shared else "Same persona, different habits."
        ),
    }


_SMALL_TALK = [
    "The practice room felt great today.",
    "I cleaned the piano keys this morning.",
    "Work ran long but I still made time for music.",
    "I found an old concert program while tidying up.",
    "The metronome needs a new battery.",
    "I hummed through my warm-up on the bus.",
    "A neighbor complimented the music coming through the wall.",
]

_ASSISTANT_REPLIES = [
    "That sounds lovely — tell me more.",
    "Nice! Consistency really shows in your playing.",
    "That's a great habit to keep.",
    "I'll remember that about you.",
    "Sounds like music keeps you grounded.",
    "That must have felt rewarding.",
    "A good routine makes all the difference.",
    "Thanks for sharing that.",
    "That's a wonderful connection to the music.",
    "I can tell this matters to you.",
]


def _make_dialogue(session_id: int, assigned: list[dict]) -> dict:
    turns = []
    plant_turns = [1, 9, 17]
    base_minute = 0
    for turn_id in range(1, TURNS_PER_SESSION + 1):
        role = "user" if turn_id % 2 == 1 else "assistant"
        ts = f"2024-03-{session_id:02d}T20:{turn_id + base_minute:02d}:00"
        if role == "user":
            if turn_id in plant_turns and plant_turns.index(turn_id) < len(assigned):
                unit = assigned[plant_turns.index(turn_id)]
                content = unit["natural_expression"] + " It came up again today."
                planted = [unit["id"]]
                mentioned = unit["involved_entities"]
            else:
                content = _SMALL_TALK[(session_id + turn_id) % len(_SMALL_TALK)]
                planted = []
                mentioned = []
            turns.append({
                "turn_id": turn_id, "role": role, "content": content,
                "timestamp": ts, "planted_units": planted,
                "mentioned_entities": mentioned,
            })
        else:
            turns.append({
                "turn_id": turn_id, "role": role,
                "content": _ASSISTANT_REPLIES[(session_id + turn_id) % len(_ASSISTANT_REPLIES)],
                "timestamp": ts, "planted_units": [], "mentioned_entities": [],
            })
    coverage = {
        unit["id"]: {"planted": True, "turns": [plant_turns[i]]}
        for i, unit in enumerate(assigned)
    }
    return {"session_id": session_id, "turns": turns, "unit_coverage": coverage}


_QUESTION_STEMS = {
    "temporal": [
        "It's {anchor} evening and I'm heading to the piano.",
        "Another {anchor} evening practice coming up.",
    ],
    "entity": [
        "I heard something by {anchor} on the radio today.",
        "{anchor} came up in conversation this afternoon.",
    ],
    "emotional": [
        "Honestly I'm feeling pretty {anchor} right now.",
        "Today left me feeling {anchor}.",
    ],
    "behavioral_pattern": [
        "Just getting ready for a practice session tonight.",
        "About to sit down and practice for a while.",
    ],
    "multi_hop": [
        "I bumped into {anchor} earlier today.",
        "{anchor} sent me a message this morning.",
    ],
}


def _question_anchor(unit: dict, trigger_type: str) -> str:
    if trigger_type == "temporal":
        return unit["time_pattern"].replace("every ", "").split()[0]
    if trigger_type == "entity":
        return unit["involved_entities"][1]
    if trigger_type == "emotional":
        return unit["emotion"]
    if trigger_type == "multi_hop":
        return unit["involved_entities"][0].capitalize()
    return "practice"


def _make_questions(units: list[dict], high: set[tuple[str, str]]) -> dict[str, list[dict]]:
    by_id = {u["id"]: u for u in units}
    partners: dict[str, list[str]] = {u["id"]: [] for u in units}
    for a, b in sorted(high):
        partners[a].append(b)
        partners[b].append(a)
    difficulties = ["easy"] * 6 + ["medium"] * 8 + ["hard"] * 6
    out: dict[str, list[dict]] = {}
    counter = 0
    for trigger_type in benchkit.TRIGGER_TYPES:
        prefix = benchkit.ID_PREFIX[trigger_type] + "_"
        type_units = [u for u in units if u["id"].startswith(prefix)]
        questions = []
        for k in range(benchkit.QUESTIONS_PER_TYPE):
            counter += 1
            trigger = type_units[k % len(type_units)]
            stem = _QUESTION_STEMS[trigger_type][k // len(type_units)]
            question_text = stem.format(anchor=_question_anchor(trigger, trigger_type))
            pool = [uid for uid in partners[trigger["id"]] if uid != trigger["id"]]
            idx = int(trigger["id"].split("_")[1])
            same_type = [u["id"] for u in type_units if u["id"] != trigger["id"]]
            for offset in range(1, 13):
                cand = same_type[(idx + offset) % len(same_type)]
                if cand not in pool:
                    pool.append(cand)
                if len(pool) >= 3:
                    break
            candidates = []
            for uid in pool[:3]:
                candidates.append({
                    "memory_unit": by_id[uid]["natural_expression"],
                    "reason": f"Association path: {question_text.rstrip('.')} → recall {uid} from prior sessions",
                })
            questions.append({
                "id": f"q_{counter:03d}",
                "trigger_type": benchkit.JSON_TYPE[trigger_type],
                "question": question_text,
                "trigger_memory_unit": trigger["natural_expression"],
                "candidate_set": candidates,
                "difficulty": difficulties[k],
                "source_units": [trigger["id"]] + pool[:3],
                "reasoning": f"Mentioning {trigger['id']} should surface {', '.join(pool[:3])}.",
            })
        out[trigger_type] = questions
    return out


TURNS_PER_SESSION = benchkit.TURNS_PER_SESSION


def build_bench_fixtures() -> dict[str, str]:
    """Record every model response the six-step pipeline will request."""
    units_raw = _make_units()
    high = _high_pairs(units_raw)
    client = FixtureClient({})

    units_objs: list = []
    for trigger_type in benchkit.TRIGGER_TYPES:
        prefix = benchkit.ID_PREFIX[trigger_type] + "_"
        batch = [u for u in units_raw if u["id"].startswith(prefix)]
        request = benchkit.unit_generation_request(
            PERSONA_MUSIC, "music", trigger_type, units_objs
        )
        client.record(request, json.dumps(batch, ensure_ascii=False))
        units_objs.extend(benchkit.MemoryUnit.from_dict(u) for u in batch)

    ordered = sorted(units_objs, key=lambda u: u.id)
    by_id = {u["id"]: u for u in units_raw}
    pairs = list(itertools.combinations(ordered, 2))
    for start in range(0, len(pairs), benchkit.SCORING_BATCH):
        batch = pairs[start : start + benchkit.SCORING_BATCH]
        payload = [_score_pair(by_id[a.id], by_id[b.id], high) for a, b in batch]
        client.record(benchkit.scoring_request(batch), json.dumps(payload, ensure_ascii=False))

    edges = [benchkit.AssociationEdge.from_dict(_score_pair(by_id[a.id], by_id[b.id], high))
             for a, b in pairs]
    sessions = benchkit.allocate_sessions(units_objs, edges)

    for idx, assigned_ids in enumerate(sessions, start=1):
        assigned_units = [next(u for u in units_objs if u.id == uid) for uid in assigned_ids]
        assigned_raw = [by_id[uid] for uid in assigned_ids]
        time_range = f"2024-03-{idx:02d}"
        theme = ", ".join(sorted({benchkit.JSON_TYPE[u.trigger_type] for u in assigned_units}))
        request = benchkit.dialogue_request(
            PERSONA_MUSIC, idx, assigned_units, time_range, theme
        )
        client.record(request, json.dumps(_make_dialogue(idx, assigned_raw), ensure_ascii=False))

    dialogues = [_make_dialogue(i + 1, [by_id[uid] for uid in s]) for i, s in enumerate(sessions)]
    question_map = _make_questions(units_raw, high)
    entity_pool = sorted({e for u in units_objs for e in u.involved_entities})
    for trigger_type in benchkit.TRIGGER_TYPES:
        type_units = [u for u in units_objs if u.trigger_type == trigger_type]
        prefix = benchkit.ID_PREFIX[trigger_type] + "_"
        cross = [
            e.to_dict() for e in edges
            if e.overall >= benchkit.HIGH_ASSOCIATION
            and (e.a.startswith(prefix)) != (e.b.startswith(prefix))
        ]
        request = benchkit.question_request(
            PERSONA_MUSIC, trigger_type, type_units, cross, entity_pool
        )
        client.record(request, json.dumps(question_map[trigger_type], ensure_ascii=False))
    return client.responses


# ---------------------------------------------------------------------------
# Growth series
# ---------------------------------------------------------------------------

GROWTH_FIXED = (
    [1.86] * 5 + [1.55] * 5 + [1.40] * 5 + [1.35] * 5 + [1.33] * 5
    + [1.32] * 5 + [1.32] * 5 + [1.31] * 5 + [1.31] * 5 + [1.30] * 5
)
GROWTH_PERCENTILE = (
    [1.90] * 5 + [1.59] * 5 + [1.45] * 5 + [1.41] * 5 + [1.39] * 5
    + [1.38] * 5 + [1.38] * 5 + [1.37] * 5 + [1.37] * 5 + [1.36] * 5
)


# ---------------------------------------------------------------------------
# Main
# ---------------------------------------------------------------------------

def main() -> None:
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    (FIXTURES / "traces").mkdir(parents=True)
    (FIXTURES / "llm" / "agent").mkdir(parents=True)
    (FIXTURES / "llm" / "bench").mkdir(parents=True)
    (FIXTURES / "llm" / "ingest").mkdir(parents=True)
    (FIXTURES / "growth").mkdir(parents=True)
    (FIXTURES / "bench").mkdir(parents=True)
    (FIXTURES / "conversations").mkdir(parents=True)

    config = ProtocolConfig()
    for name, builder in CASES.items():
        store = builder()
        write_store(store, FIXTURES / "stores" / name)
        captured, answer, steps = record_reactive_case(
            name, store, REACTIVE_SCRIPTS[name], config
        )
        FixtureClient(captured).save(FIXTURES / "llm" / "agent" / f"{name}.json")
        (FIXTURES / "traces" / f"{name}.jsonl").write_text(
            dump_trace(trace_from_steps(steps, answer)), encoding="utf-8"
        )
        print(f"recorded {name}: {len(steps)} steps -> {answer[:60]!r}")

    # Ablation variant: the same timeline question without the graph overlay.
    no_overlay = ProtocolConfig(graph_overlay_enabled=False)
    store = CASES["timeline"]()
    recorder = RecordingClient(PolicyClient(TIMELINE_NO_OVERLAY_SCRIPT["script"]))
    answer, steps = run_reactive(
        store, TIMELINE_NO_OVERLAY_SCRIPT["question"], recorder, no_overlay
    )
    if "fence" not in answer.lower():
        raise SystemExit("no-overlay timeline run produced a wrong answer")
    FixtureClient(recorder.captured).save(
        FIXTURES / "llm" / "agent" / "timeline_no_overlay.json"
    )
    (FIXTURES / "traces" / "timeline_no_overlay.jsonl").write_text(
        dump_trace(trace_from_steps(steps, answer)), encoding="utf-8"
    )
    print(f"recorded timeline_no_overlay: {len(steps)} steps")

    # Proactive run on the open-ended store.
    store = CASES["open_ended"]()
    script = list(PROACTIVE_SCRIPT["script"])
    recorder = RecordingClient(PolicyClient(script + [PROACTIVE_SCRIPT["generation"]]))
    recalled, steps = run_proactive(
        store, PROACTIVE_SCRIPT["utterance"], recorder, ProtocolConfig()
    )
    if len(recalled) != 2:
        raise SystemExit(f"proactive run recalled {len(recalled)} items, expected 2")
    FixtureClient(recorder.captured).save(FIXTURES / "llm" / "agent" / "proactive_open_ended.json")
    print(f"recorded proactive_open_ended: {len(recalled)} recalled")

    # Ingestion fixtures.
    (FIXTURES / "conversations" / "farm.json").write_text(
        json.dumps(FARM_TURNS, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    FixtureClient(build_farm_fixtures()).save(FIXTURES / "llm" / "ingest" / "farm.json")
    print("recorded ingest/farm fixtures")

    # Bench fixtures.
    (FIXTURES / "bench" / "persona_music.json").write_text(
        json.dumps(PERSONA_MUSIC, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    FixtureClient(build_bench_fixtures()).save(FIXTURES / "llm" / "bench" / "music.json")
    print("recorded bench/music fixtures")

    (FIXTURES / "growth" / "fixed_window.json").write_text(
        json.dumps(GROWTH_FIXED) + "\n", encoding="utf-8"
    )
    (FIXTURES / "growth" / "percentile.json").write_text(
        json.dumps(GROWTH_PERCENTILE) + "\n", encoding="utf-8"
    )
    print("wrote growth series")


if __name__ == "__main__":
    main()
