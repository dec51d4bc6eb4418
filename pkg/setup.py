import setuptools

#-------------------------------------------------------------------------------

with open("README.md") as file:
    long_description = file.read()

setuptools.setup(
    name            ="multilambda",
    version         ="0.1.1",
    description     ="multi-Λ cavity QED: effective Hamiltonians and Raman beam splitters",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license         ="MIT",
    keywords        =["quantum optics", "cavity QED", "Raman", "atom interferometry"],
    classifiers     =[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Physics",
    ],

    python_requires =">=3.8",
    install_requires=[
        "numpy",
        "pyyaml",
        "scipy",
    ],
    extras_require={
        "test": ["pytest"],
    },

    packages        =setuptools.find_packages(exclude=["test", "test.*"]),
    entry_points={
        'console_scripts': [
            'simulate=multilambda.__main__:main',
        ],
    },
)

